//! Scenario configuration.
//!
//! Scenarios are TOML files. Every default lives in the bundled
//! `scenarios/default.toml`; a user file is merged key-by-key over it, so an
//! empty file yields the default scenario.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::emitters::{lambertian_order, SystemId};
use crate::geometry::{DiscretizationPolicy, Room, Vec3};
use crate::grid::Combining;
use crate::propagation::ReflectionOrder;
use crate::receiver::NoiseParams;

/// The bundled default scenario.
pub const DEFAULT_SCENARIO: &str = include_str!("../scenarios/default.toml");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid value for `{key}`: {constraint}")]
    Invalid { key: String, constraint: String },
}

fn invalid(key: &str, constraint: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        constraint: constraint.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomConfig {
    pub width_x: f64,
    pub length_y: f64,
    pub height_z: f64,
    pub reflectivity_ceiling: f64,
    pub reflectivity_walls: f64,
    pub reflectivity_floor: f64,
    pub comm_floor_z: f64,
}

impl From<&RoomConfig> for Room {
    fn from(c: &RoomConfig) -> Room {
        Room {
            width_x: c.width_x,
            length_y: c.length_y,
            height_z: c.height_z,
            reflectivity_ceiling: c.reflectivity_ceiling,
            reflectivity_walls: c.reflectivity_walls,
            reflectivity_floor: c.reflectivity_floor,
            comm_floor_z: c.comm_floor_z,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscretizationConfig {
    pub first_order_element: f64,
    pub second_order_element: f64,
    pub reflection_order: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MicroConfig {
    pub position: [f64; 3],
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub semi_angle_deg: f64,
    pub optical_power_w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdtConfig {
    pub positions: Vec<[f64; 3]>,
    pub down_azimuth_deg: f64,
    pub down_elevation_deg: f64,
    pub side_azimuths_deg: Vec<f64>,
    pub side_elevation_deg: f64,
    pub pico_semi_angle_deg: f64,
    pub atto_semi_angle_deg: f64,
    pub pico_optical_power_w: f64,
    pub atto_optical_power_w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FluxMode {
    Calibrate,
}

/// Per-LD luminous flux: a fixed value in lumens or calibrated at run time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FluxSetting {
    Lumens(f64),
    Mode(FluxMode),
}

impl FluxSetting {
    pub fn lumens(self) -> Option<f64> {
        match self {
            FluxSetting::Lumens(v) => Some(v),
            FluxSetting::Mode(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IlluminationConfig {
    pub positions: Vec<[f64; 3]>,
    pub lds_per_unit: usize,
    pub semi_angle_deg: f64,
    pub optical_power_w: f64,
    pub luminous_flux: FluxSetting,
    pub calibrate_target_lux: f64,
    /// Upper bound of the compliance window (lx).
    pub max_lux: f64,
    /// Lower bound of the compliance window (lx).
    pub min_lux: f64,
    pub include_reflections: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceiverConfig {
    /// Added to every branch azimuth to map the listed angles into room axes.
    pub azimuth_offset_deg: f64,
    pub side_azimuths_deg: Vec<f64>,
    pub side_elevation_deg: f64,
    pub side_fov_deg: f64,
    pub top_azimuth_deg: f64,
    pub top_elevation_deg: f64,
    pub top_fov_deg: f64,
    pub area_m2: f64,
    pub responsivity_a_per_w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub micro: NoiseParams,
    pub pico: NoiseParams,
    pub atto: NoiseParams,
}

impl NoiseConfig {
    pub fn get(&self, system: SystemId) -> Option<&NoiseParams> {
        match system {
            SystemId::Micro => Some(&self.micro),
            SystemId::Pico => Some(&self.pico),
            SystemId::Atto => Some(&self.atto),
            SystemId::Illumination => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    pub target_ber: f64,
    /// bit/s per Hz of receiver bandwidth when the BER target is met
    pub spectral_efficiency: f64,
    pub intra_system_interference: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid_step: f64,
    pub combining: Combining,
    pub serving: SystemId,
    pub interfering: Vec<SystemId>,
    pub output_dir: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub room: RoomConfig,
    pub discretization: DiscretizationConfig,
    pub micro: MicroConfig,
    pub adt: AdtConfig,
    pub illumination: IlluminationConfig,
    pub receiver: ReceiverConfig,
    pub noise: NoiseConfig,
    pub link: LinkConfig,
    pub run: RunConfig,
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Vec3 {
        Vec3::new(a[0], a[1], a[2])
    }
}

/// Recursively overlays `user` onto `base`; tables merge, everything else
/// replaces.
fn merge(base: &mut toml::Table, user: toml::Table) {
    for (k, v) in user {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(u)) => merge(b, u),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

impl ScenarioConfig {
    /// The bundled default scenario.
    pub fn default_scenario() -> ScenarioConfig {
        ScenarioConfig::from_toml_str("").expect("bundled default scenario is valid")
    }

    /// Parses a scenario, filling absent keys from the defaults, and validates it.
    pub fn from_toml_str(text: &str) -> Result<ScenarioConfig, ConfigError> {
        let mut base: toml::Table = DEFAULT_SCENARIO
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::Parse(format!("bundled defaults: {e}")))?;
        let user: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::Parse(one_line(&e.to_string())))?;
        merge(&mut base, user);
        let cfg: ScenarioConfig = toml::Value::Table(base)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(one_line(&e.to_string())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn room(&self) -> Room {
        Room::from(&self.room)
    }

    pub fn policy(&self) -> DiscretizationPolicy {
        DiscretizationPolicy {
            first_order_element: self.discretization.first_order_element,
            second_order_element: self.discretization.second_order_element,
        }
    }

    pub fn reflection_order(&self) -> ReflectionOrder {
        ReflectionOrder::from_u8(self.discretization.reflection_order).unwrap_or(ReflectionOrder::Second)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let r = &self.room;
        for (k, v) in [
            ("room.width_x", r.width_x),
            ("room.length_y", r.length_y),
            ("room.height_z", r.height_z),
        ] {
            positive(k, v)?;
        }
        for (k, v) in [
            ("room.reflectivity_ceiling", r.reflectivity_ceiling),
            ("room.reflectivity_walls", r.reflectivity_walls),
            ("room.reflectivity_floor", r.reflectivity_floor),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(k, format!("must lie in [0, 1], got {v}")));
            }
        }
        if !(r.comm_floor_z >= 0.0 && r.comm_floor_z < r.height_z) {
            return Err(invalid("room.comm_floor_z", "must lie in [0, room.height_z)"));
        }

        let d = &self.discretization;
        positive("discretization.first_order_element", d.first_order_element)?;
        positive("discretization.second_order_element", d.second_order_element)?;
        if d.second_order_element < d.first_order_element {
            return Err(invalid(
                "discretization.second_order_element",
                "must be >= discretization.first_order_element",
            ));
        }
        let smallest = r.width_x.min(r.length_y).min(r.height_z);
        if d.second_order_element > smallest {
            return Err(invalid(
                "discretization.second_order_element",
                format!("must not exceed the smallest room dimension {smallest}"),
            ));
        }
        if d.reflection_order > 2 {
            return Err(invalid("discretization.reflection_order", "must be 0, 1 or 2"));
        }

        let m = &self.micro;
        semi_angle("micro.semi_angle_deg", m.semi_angle_deg)?;
        non_negative("micro.optical_power_w", m.optical_power_w)?;
        self.inside_room("micro.position", m.position)?;

        let a = &self.adt;
        semi_angle("adt.pico_semi_angle_deg", a.pico_semi_angle_deg)?;
        semi_angle("adt.atto_semi_angle_deg", a.atto_semi_angle_deg)?;
        non_negative("adt.pico_optical_power_w", a.pico_optical_power_w)?;
        non_negative("adt.atto_optical_power_w", a.atto_optical_power_w)?;
        if a.positions.is_empty() {
            return Err(invalid("adt.positions", "at least one ADT unit is required"));
        }
        if a.side_azimuths_deg.is_empty() {
            return Err(invalid("adt.side_azimuths_deg", "at least one side branch is required"));
        }
        for &p in &a.positions {
            self.inside_room("adt.positions", p)?;
        }

        let l = &self.illumination;
        semi_angle("illumination.semi_angle_deg", l.semi_angle_deg)?;
        non_negative("illumination.optical_power_w", l.optical_power_w)?;
        if l.positions.is_empty() {
            return Err(invalid("illumination.positions", "at least one unit is required"));
        }
        for &p in &l.positions {
            self.inside_room("illumination.positions", p)?;
        }
        if l.lds_per_unit == 0 {
            return Err(invalid("illumination.lds_per_unit", "must be >= 1"));
        }
        if let Some(v) = l.luminous_flux.lumens() {
            positive("illumination.luminous_flux", v)?;
        }
        positive("illumination.calibrate_target_lux", l.calibrate_target_lux)?;
        positive("illumination.max_lux", l.max_lux)?;
        non_negative("illumination.min_lux", l.min_lux)?;

        let rc = &self.receiver;
        if rc.side_azimuths_deg.is_empty() {
            return Err(invalid("receiver.side_azimuths_deg", "at least one side branch is required"));
        }
        fov("receiver.side_fov_deg", rc.side_fov_deg)?;
        fov("receiver.top_fov_deg", rc.top_fov_deg)?;
        positive("receiver.area_m2", rc.area_m2)?;
        positive("receiver.responsivity_a_per_w", rc.responsivity_a_per_w)?;

        for sys in SystemId::CELLS {
            let n = self.noise.get(sys).expect("cell system");
            let key = |f: &str| format!("noise.{sys}.{f}");
            positive(&key("bandwidth"), n.bandwidth)?;
            non_negative(&key("preamp_noise_density"), n.preamp_noise_density)?;
            non_negative(&key("background_current"), n.background_current)?;
        }

        let k = &self.link;
        if !(k.target_ber > 0.0 && k.target_ber < 0.5) {
            return Err(invalid("link.target_ber", "must lie in (0, 0.5)"));
        }
        positive("link.spectral_efficiency", k.spectral_efficiency)?;

        let run = &self.run;
        positive("run.grid_step", run.grid_step)?;
        if run.grid_step > r.width_x.min(r.length_y) {
            return Err(invalid("run.grid_step", "must not exceed the smaller floor dimension"));
        }
        if run.serving == SystemId::Illumination {
            return Err(invalid("run.serving", "must be micro, pico or atto"));
        }
        for (i, s) in run.interfering.iter().enumerate() {
            if *s == SystemId::Illumination {
                return Err(invalid("run.interfering", "must list only micro, pico or atto"));
            }
            if *s == run.serving {
                return Err(invalid("run.interfering", "must not contain the serving system"));
            }
            if run.interfering[..i].contains(s) {
                return Err(invalid("run.interfering", format!("lists {s} twice")));
            }
        }
        Ok(())
    }

    fn inside_room(&self, key: &str, p: [f64; 3]) -> Result<(), ConfigError> {
        let r = &self.room;
        let inside = (0.0..=r.width_x).contains(&p[0])
            && (0.0..=r.length_y).contains(&p[1])
            && (0.0..=r.height_z).contains(&p[2]);
        if inside {
            Ok(())
        } else {
            Err(invalid(key, format!("position {p:?} lies outside the room")))
        }
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn positive(key: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(key, format!("must be > 0, got {v}")))
    }
}

fn non_negative(key: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(invalid(key, format!("must be >= 0, got {v}")))
    }
}

fn semi_angle(key: &str, v: f64) -> Result<(), ConfigError> {
    lambertian_order(v)
        .map(|_| ())
        .map_err(|_| invalid(key, format!("must lie in (0, 90), got {v}")))
}

fn fov(key: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v <= 90.0 {
        Ok(())
    } else {
        Err(invalid(key, format!("must lie in (0, 90], got {v}")))
    }
}

/// Loads and validates a scenario file.
pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    ScenarioConfig::from_toml_str(&text)
}

/// Writes a complete scenario (every key explicit).
pub fn write_scenario(path: &Path, cfg: &ScenarioConfig) -> Result<(), ConfigError> {
    fs::write(path, cfg.to_toml_string()).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })
}
