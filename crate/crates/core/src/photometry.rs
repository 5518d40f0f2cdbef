//! Illuminance on the communication floor from the illumination LDs.

use std::f64::consts::PI;

use rayon::prelude::*;
use thiserror::Error;

use crate::config::ScenarioConfig;
use crate::emitters::{LambertianSource, SystemLayout};
use crate::geometry::{cf_grid, discretize_room, GeometryError, Room, SurfaceElement, Vec3};
use crate::grid::{GridError, Quantity, ScalarGrid};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhotometryError {
    #[error("illumination layout leaves part of the floor unlit (minimum illuminance is zero)")]
    NoCoverage,
    #[error("target illuminance must be positive, got {0}")]
    Target(f64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Illumination outcome for a scenario: the per-LD flux used and the map.
#[derive(Debug, Clone, PartialEq)]
pub struct Illumination {
    pub flux_per_ld: f64,
    pub calibrated: bool,
    pub map: IlluminanceMap,
}

/// Direct (LOS) illuminance in lux on a horizontal, upward-facing surface.
pub fn illuminance_at(point: Vec3, sources: &[LambertianSource]) -> f64 {
    sources
        .iter()
        .map(|s| {
            let v = point - s.position;
            let d2 = v.norm_squared();
            if d2 == 0.0 {
                return 0.0;
            }
            let travel = v * (1.0 / d2.sqrt());
            let cos_in = -travel.z;
            if cos_in <= 0.0 {
                return 0.0;
            }
            s.luminous_intensity(travel) * cos_in / d2
        })
        .sum()
}

/// Luminous flux (lm) landing on each element directly from `sources`.
pub fn element_flux(sources: &[LambertianSource], elements: &[SurfaceElement]) -> Vec<f64> {
    elements
        .par_iter()
        .map(|e| {
            sources
                .iter()
                .map(|s| {
                    let v = e.centre - s.position;
                    let d2 = v.norm_squared();
                    if d2 == 0.0 {
                        return 0.0;
                    }
                    let travel = v * (1.0 / d2.sqrt());
                    let cos_in = -e.normal.dot(travel);
                    if cos_in <= 0.0 {
                        return 0.0;
                    }
                    s.luminous_intensity(travel) * cos_in * e.area / d2
                })
                .sum()
        })
        .collect()
}

/// Illuminance at `point` from elements re-emitting `flux` (one value per
/// element, before reflectivity) with an n = 1 pattern.
fn bounced(point: Vec3, elements: &[SurfaceElement], flux: &[f64]) -> f64 {
    elements
        .iter()
        .zip(flux)
        .map(|(e, &f)| {
            if f == 0.0 {
                return 0.0;
            }
            let v = point - e.centre;
            let d2 = v.norm_squared();
            let travel = v * (1.0 / d2.sqrt());
            let cos_out = e.normal.dot(travel);
            let cos_in = -travel.z;
            if cos_out <= 0.0 || cos_in <= 0.0 {
                return 0.0;
            }
            f * e.reflectivity * cos_out / PI * cos_in / d2
        })
        .sum()
}

/// Illuminance after one diffuse reflection off `elements`.
pub fn reflected_illuminance_at(point: Vec3, sources: &[LambertianSource], elements: &[SurfaceElement]) -> f64 {
    bounced(point, elements, &element_flux(sources, elements))
}

#[derive(Debug, Clone, PartialEq)]
pub struct IlluminanceMap {
    pub grid: ScalarGrid,
    pub min_lux: f64,
    pub max_lux: f64,
}

/// Illuminance over the floor lattice. `reflections` adds the first-order
/// reflected term computed over those elements.
pub fn illuminance_map(
    room: &Room,
    sources: &[LambertianSource],
    step: f64,
    reflections: Option<&[SurfaceElement]>,
) -> Result<IlluminanceMap, PhotometryError> {
    let lattice = cf_grid(room, step)?;
    let flux = reflections.map(|els| element_flux(sources, els));
    let values: Vec<f64> = lattice
        .points
        .par_iter()
        .map(|&p| {
            let direct = illuminance_at(p, sources);
            match (reflections, &flux) {
                (Some(els), Some(f)) => direct + bounced(p, els, f),
                _ => direct,
            }
        })
        .collect();
    let min_lux = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max_lux = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(IlluminanceMap {
        grid: ScalarGrid::new(lattice.nx, lattice.ny, step, values, Quantity::Lux)?,
        min_lux,
        max_lux,
    })
}

/// Per-LD luminous flux that puts the map minimum at `target_min` lux.
/// Illuminance is linear in flux, so one unit-flux map suffices.
pub fn calibrate_flux(
    layout: &SystemLayout,
    room: &Room,
    step: f64,
    target_min: f64,
    reflection_element: Option<f64>,
) -> Result<f64, PhotometryError> {
    if !(target_min > 0.0 && target_min.is_finite()) {
        return Err(PhotometryError::Target(target_min));
    }
    let unit = layout.clone().with_luminous_flux(1.0);
    let elements = reflection_element.map(|s| discretize_room(room, s)).transpose()?;
    let map = illuminance_map(room, &unit.illumination, step, elements.as_deref())?;
    if !(map.min_lux > 0.0) {
        return Err(PhotometryError::NoCoverage);
    }
    Ok(target_min / map.min_lux)
}

/// Evaluates the scenario's illumination on its floor lattice. The flux comes
/// from the configuration unless `calibrate_to` (or a `"calibrate"` setting)
/// asks for calibration, in which case the map minimum is put at that level.
pub fn scenario_illumination(
    cfg: &ScenarioConfig,
    layout: &SystemLayout,
    calibrate_to: Option<f64>,
) -> Result<Illumination, PhotometryError> {
    let room = cfg.room();
    let step = cfg.run.grid_step;
    let element = cfg
        .illumination
        .include_reflections
        .then_some(cfg.discretization.first_order_element);
    let fixed = cfg.illumination.luminous_flux.lumens();
    let (flux, calibrated) = match (calibrate_to, fixed) {
        (None, Some(f)) => (f, false),
        (target, _) => {
            let t = target.unwrap_or(cfg.illumination.calibrate_target_lux);
            (calibrate_flux(layout, &room, step, t, element)?, true)
        }
    };
    let lit = layout.clone().with_luminous_flux(flux);
    let elements = element.map(|s| discretize_room(&room, s)).transpose()?;
    let map = illuminance_map(&room, &lit.illumination, step, elements.as_deref())?;
    Ok(Illumination {
        flux_per_ld: flux,
        calibrated,
        map,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;
    use crate::emitters::{build_layout, lambertian_order, SystemId};

    fn ld(pos: Vec3, n: f64, flux: f64) -> LambertianSource {
        LambertianSource {
            position: pos,
            orientation: Vec3::DOWN,
            order_n: n,
            optical_power: 0.0,
            luminous_flux: flux,
            system: SystemId::Illumination,
        }
    }

    fn default_setup() -> (Room, SystemLayout) {
        let cfg = ScenarioConfig::default_scenario();
        (cfg.room(), build_layout(&cfg).unwrap())
    }

    #[test]
    fn on_axis_example() {
        let e = illuminance_at(Vec3::new(0.0, 0.0, 0.0), &[ld(Vec3::new(0.0, 0.0, 1.0), 1.0, 1.0)]);
        assert!((e - 1.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn behind_source_is_dark() {
        let s = [ld(Vec3::new(0.0, 0.0, 1.0), 1.0, 1.0)];
        assert_eq!(illuminance_at(Vec3::new(0.0, 0.0, 2.0), &s), 0.0);
        assert_eq!(illuminance_at(Vec3::new(5.0, 0.0, 1.0), &s), 0.0);
    }

    #[test]
    fn linear_in_flux() {
        let n = lambertian_order(70.0).unwrap();
        let p = Vec3::new(0.3, 1.7, 1.0);
        let a = illuminance_at(p, &[ld(Vec3::new(2.0, 1.0, 3.0), n, 1.0)]);
        let b = illuminance_at(p, &[ld(Vec3::new(2.0, 1.0, 3.0), n, 7.5)]);
        assert!((b / a - 7.5).abs() < 1e-12);
    }

    #[test]
    fn map_is_symmetric() {
        let (room, layout) = default_setup();
        let layout = layout.with_luminous_flux(1.0);
        let m = illuminance_map(&room, &layout.illumination, 0.25, None).unwrap();
        let g = &m.grid;
        for j in 0..g.ny {
            for i in 0..g.nx {
                let v = g.get(i, j);
                for w in [g.get(g.nx - 1 - i, j), g.get(i, g.ny - 1 - j)] {
                    assert!(((v - w) / v).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn calibration_examples() {
        let (room, layout) = default_setup();
        let a = calibrate_flux(&layout, &room, 0.25, 306.4, None).unwrap();
        let b = calibrate_flux(&layout, &room, 0.25, 612.8, None).unwrap();
        assert!((b / a - 2.0).abs() < 1e-12);
        let m = illuminance_map(&room, &layout.clone().with_luminous_flux(a).illumination, 0.25, None).unwrap();
        assert!(((m.min_lux - 306.4) / 306.4).abs() < 1e-9);
        // max/min ratio of the LOS map, from an independent numpy evaluation
        assert!((m.max_lux / 306.4 - 4.247517358691568).abs() < 1e-9);
        assert!(calibrate_flux(&layout, &room, 0.25, 0.0, None).is_err());
    }

    #[test]
    fn zero_coverage_is_an_error() {
        let (room, mut layout) = default_setup();
        for s in &mut layout.illumination {
            s.orientation = Vec3::UP;
        }
        assert_eq!(
            calibrate_flux(&layout, &room, 0.25, 300.0, None),
            Err(PhotometryError::NoCoverage)
        );
    }

    #[test]
    fn reflections_add_light() {
        let (room, layout) = default_setup();
        let layout = layout.with_luminous_flux(1.0);
        let els = discretize_room(&room, 0.2).unwrap();
        let p = Vec3::new(0.125, 0.125, 1.0);
        let direct = illuminance_at(p, &layout.illumination);
        let bounced = reflected_illuminance_at(p, &layout.illumination, &els);
        assert!(bounced > 0.0);
        // bounded by what the walls could possibly return
        assert!(bounced < direct * 10.0);
        let black = discretize_room(&room.blackened(), 0.2).unwrap();
        assert_eq!(reflected_illuminance_at(p, &layout.illumination, &black), 0.0);
    }
}
