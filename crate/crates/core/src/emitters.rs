//! Optical sources: the infrared Micro transmitter, the ceiling angle
//! diversity transmitter (ADT) units feeding the Pico and Atto cells, and the
//! RYGB laser-diode illumination units.

use std::f64::consts::{LN_2, PI};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::ScenarioConfig;
use crate::geometry::{az_el_to_direction, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmitterError {
    #[error("semi-angle {0} deg outside (0, 90)")]
    SemiAngle(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemId {
    Micro,
    Pico,
    Atto,
    Illumination,
}

impl SystemId {
    pub const CELLS: [SystemId; 3] = [SystemId::Micro, SystemId::Pico, SystemId::Atto];

    pub fn name(self) -> &'static str {
        match self {
            SystemId::Micro => "micro",
            SystemId::Pico => "pico",
            SystemId::Atto => "atto",
            SystemId::Illumination => "illumination",
        }
    }

    pub fn parse(s: &str) -> Option<SystemId> {
        match s.trim().to_ascii_lowercase().as_str() {
            "micro" => Some(SystemId::Micro),
            "pico" => Some(SystemId::Pico),
            "atto" => Some(SystemId::Atto),
            "illumination" => Some(SystemId::Illumination),
            _ => None,
        }
    }
}

impl fmt::Display for SystemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Lambertian order giving half the on-axis intensity at `semi_angle_deg`.
pub fn lambertian_order(semi_angle_deg: f64) -> Result<f64, EmitterError> {
    if !(semi_angle_deg > 0.0 && semi_angle_deg < 90.0) {
        return Err(EmitterError::SemiAngle(semi_angle_deg));
    }
    Ok(-LN_2 / semi_angle_deg.to_radians().cos().ln())
}

/// A point emitter with a generalized Lambertian pattern.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambertianSource {
    pub position: Vec3,
    pub orientation: Vec3,
    pub order_n: f64,
    /// Transmitted optical power (W).
    pub optical_power: f64,
    /// Luminous flux (lm); zero for communication-only sources.
    pub luminous_flux: f64,
    pub system: SystemId,
}

impl LambertianSource {
    /// Radiant intensity (W/sr) along the unit vector `direction`.
    pub fn radiant_intensity(&self, direction: Vec3) -> f64 {
        self.optical_power * self.pattern(direction)
    }

    /// Luminous intensity (cd) along `direction`.
    pub fn luminous_intensity(&self, direction: Vec3) -> f64 {
        self.luminous_flux * self.pattern(direction)
    }

    /// Normalized pattern `(n+1)/(2π)·cosⁿφ`, zero behind the emitter.
    pub fn pattern(&self, direction: Vec3) -> f64 {
        let cos_phi = self.orientation.dot(direction);
        if cos_phi <= 0.0 {
            return 0.0;
        }
        (self.order_n + 1.0) / (2.0 * PI) * cos_phi.powf(self.order_n)
    }
}

/// Free-function form of [`LambertianSource::radiant_intensity`].
pub fn radiant_intensity(src: &LambertianSource, direction: Vec3) -> f64 {
    src.radiant_intensity(direction)
}

/// One ceiling ADT light unit: a down-facing Pico branch followed by the
/// tilted Atto branches.
#[derive(Debug, Clone, PartialEq)]
pub struct AdtUnit {
    pub position: Vec3,
    pub branches: Vec<LambertianSource>,
}

impl AdtUnit {
    pub fn down_branch(&self) -> &LambertianSource {
        &self.branches[0]
    }

    pub fn side_branches(&self) -> &[LambertianSource] {
        &self.branches[1..]
    }
}

/// Every source in the room.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemLayout {
    pub micro: LambertianSource,
    pub adt_units: Vec<AdtUnit>,
    /// Pico sources: the down branch of each ADT unit, in unit order.
    pub pico: Vec<LambertianSource>,
    /// Atto sources: the side branches of each ADT unit, unit-major.
    pub atto: Vec<LambertianSource>,
    /// Illumination LDs, unit-major.
    pub illumination: Vec<LambertianSource>,
    pub illumination_units: Vec<Vec3>,
}

impl SystemLayout {
    pub fn sources(&self, system: SystemId) -> &[LambertianSource] {
        match system {
            SystemId::Micro => std::slice::from_ref(&self.micro),
            SystemId::Pico => &self.pico,
            SystemId::Atto => &self.atto,
            SystemId::Illumination => &self.illumination,
        }
    }

    pub fn source_count(&self) -> usize {
        1 + self.pico.len() + self.atto.len() + self.illumination.len()
    }

    /// Same layout with every illumination LD emitting `flux` lumens.
    pub fn with_luminous_flux(mut self, flux: f64) -> SystemLayout {
        for s in &mut self.illumination {
            s.luminous_flux = flux;
        }
        self
    }
}

/// Builds the full room layout from a scenario.
pub fn build_layout(config: &ScenarioConfig) -> Result<SystemLayout, EmitterError> {
    let micro_cfg = &config.micro;
    let micro = LambertianSource {
        position: micro_cfg.position.into(),
        orientation: az_el_to_direction(micro_cfg.azimuth_deg, micro_cfg.elevation_deg),
        order_n: lambertian_order(micro_cfg.semi_angle_deg)?,
        optical_power: micro_cfg.optical_power_w,
        luminous_flux: 0.0,
        system: SystemId::Micro,
    };

    let adt = &config.adt;
    let pico_n = lambertian_order(adt.pico_semi_angle_deg)?;
    let atto_n = lambertian_order(adt.atto_semi_angle_deg)?;
    let mut adt_units = Vec::with_capacity(adt.positions.len());
    for &p in &adt.positions {
        let position: Vec3 = p.into();
        let mut branches = vec![LambertianSource {
            position,
            orientation: az_el_to_direction(adt.down_azimuth_deg, adt.down_elevation_deg),
            order_n: pico_n,
            optical_power: adt.pico_optical_power_w,
            luminous_flux: 0.0,
            system: SystemId::Pico,
        }];
        branches.extend(adt.side_azimuths_deg.iter().map(|&az| LambertianSource {
            position,
            orientation: az_el_to_direction(az, adt.side_elevation_deg),
            order_n: atto_n,
            optical_power: adt.atto_optical_power_w,
            luminous_flux: 0.0,
            system: SystemId::Atto,
        }));
        adt_units.push(AdtUnit { position, branches });
    }
    let pico = adt_units.iter().map(|u| *u.down_branch()).collect();
    let atto = adt_units
        .iter()
        .flat_map(|u| u.side_branches().iter().copied())
        .collect();

    let lum = &config.illumination;
    let lum_n = lambertian_order(lum.semi_angle_deg)?;
    let flux = lum.luminous_flux.lumens().unwrap_or(0.0);
    let illumination_units: Vec<Vec3> = lum.positions.iter().map(|&p| p.into()).collect();
    let illumination = illumination_units
        .iter()
        .flat_map(|&position| {
            (0..lum.lds_per_unit).map(move |_| LambertianSource {
                position,
                orientation: Vec3::DOWN,
                order_n: lum_n,
                optical_power: lum.optical_power_w,
                luminous_flux: flux,
                system: SystemId::Illumination,
            })
        })
        .collect();

    Ok(SystemLayout {
        micro,
        adt_units,
        pico,
        atto,
        illumination,
        illumination_units,
    })
}
