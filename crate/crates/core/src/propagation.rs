//! Received optical power over the line-of-sight path and first- and
//! second-order diffuse reflections from the room surfaces.
//!
//! Two routes are provided. The direct functions ([`first_order_power`],
//! [`second_order_power`]) evaluate the path sums for one source and one
//! receiver as written. [`Scene`] factors the same sums into a source-side
//! part (power re-emitted by each surface element, computed once per source)
//! and a receiver-side part (coupling of each element into an aperture), which
//! is what map sweeps use.

use std::f64::consts::PI;

use rayon::prelude::*;
use thiserror::Error;

use crate::emitters::LambertianSource;
use crate::geometry::{discretize_room, DiscretizationPolicy, GeometryError, Room, SurfaceElement, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PropagationError {
    #[error("source and receiver coincide at ({}, {}, {})", .0.x, .0.y, .0.z)]
    Coincident(Vec3),
    #[error("receiver FOV {0} deg outside (0, 90]")]
    Fov(f64),
    #[error("receiver area {0} m^2 must be positive")]
    Area(f64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// A photodetector aperture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceiverAperture {
    pub position: Vec3,
    pub orientation: Vec3,
    pub fov_deg: f64,
    pub area: f64,
    cos_fov: f64,
}

impl ReceiverAperture {
    pub fn new(position: Vec3, orientation: Vec3, fov_deg: f64, area: f64) -> Result<Self, PropagationError> {
        if !(fov_deg > 0.0 && fov_deg <= 90.0) {
            return Err(PropagationError::Fov(fov_deg));
        }
        if !(area > 0.0) {
            return Err(PropagationError::Area(area));
        }
        Ok(ReceiverAperture {
            position,
            orientation: orientation.normalized(),
            fov_deg,
            area,
            cos_fov: fov_deg.to_radians().cos(),
        })
    }

    pub fn cos_fov(&self) -> f64 {
        self.cos_fov
    }

    /// Cosine of the incidence angle for light arriving along unit vector
    /// `travel` (pointing from the emitter towards the aperture), or `None`
    /// when the ray is outside the field of view.
    #[inline]
    fn accept(&self, travel: Vec3) -> Option<f64> {
        let cos_in = -self.orientation.dot(travel);
        (cos_in > 0.0 && cos_in >= self.cos_fov).then_some(cos_in)
    }
}

/// Received power split by path.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PathBudget {
    pub los: f64,
    pub first_order: f64,
    pub second_order: f64,
    pub total: f64,
}

impl PathBudget {
    pub fn new(los: f64, first_order: f64, second_order: f64) -> Self {
        PathBudget {
            los,
            first_order,
            second_order,
            total: los + first_order + second_order,
        }
    }

    pub fn reflected(&self) -> f64 {
        self.first_order + self.second_order
    }
}

/// Highest reflection order included in a computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ReflectionOrder {
    LineOfSight = 0,
    First = 1,
    Second = 2,
}

impl ReflectionOrder {
    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(ReflectionOrder::LineOfSight),
            1 => Some(ReflectionOrder::First),
            2 => Some(ReflectionOrder::Second),
            _ => None,
        }
    }
}

/// A reflected-power sum and whether it was computed over an empty element set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reflected {
    pub power: f64,
    pub no_elements: bool,
}

/// DC gain of the direct path from `src` to `rx`; multiply by the source
/// power to get received power.
pub fn los_gain(src: &LambertianSource, rx: &ReceiverAperture) -> Result<f64, PropagationError> {
    let v = rx.position - src.position;
    let d2 = v.norm_squared();
    if d2 == 0.0 {
        return Err(PropagationError::Coincident(rx.position));
    }
    let travel = v * (1.0 / d2.sqrt());
    let pattern = src.pattern(travel);
    if pattern == 0.0 {
        return Ok(0.0);
    }
    Ok(match rx.accept(travel) {
        Some(cos_in) => pattern * cos_in * rx.area / d2,
        None => 0.0,
    })
}

/// Power (W) landing on element `e` directly from `src`.
#[inline]
fn source_to_element(src: &LambertianSource, e: &SurfaceElement) -> f64 {
    let v = e.centre - src.position;
    let d2 = v.norm_squared();
    if d2 == 0.0 {
        return 0.0;
    }
    let travel = v * (1.0 / d2.sqrt());
    let cos_in = -e.normal.dot(travel);
    if cos_in <= 0.0 {
        return 0.0;
    }
    src.radiant_intensity(travel) * cos_in * e.area / d2
}

/// Lambertian re-emission pattern of an element along unit vector `travel`.
#[inline]
fn element_pattern(e: &SurfaceElement, travel: Vec3) -> f64 {
    let cos_out = e.normal.dot(travel);
    if cos_out <= 0.0 {
        return 0.0;
    }
    let n = e.emission_order;
    let shape = if n == 1.0 { cos_out } else { cos_out.powf(n) };
    (n + 1.0) / (2.0 * PI) * shape
}

/// Fraction of the power re-emitted by `e` that is collected by `rx`.
#[inline]
fn element_to_receiver(e: &SurfaceElement, rx: &ReceiverAperture) -> f64 {
    let v = rx.position - e.centre;
    let d2 = v.norm_squared();
    if d2 == 0.0 {
        return 0.0;
    }
    let travel = v * (1.0 / d2.sqrt());
    let Some(cos_in) = rx.accept(travel) else {
        return 0.0;
    };
    element_pattern(e, travel) * cos_in * rx.area / d2
}

/// Fraction of the power re-emitted by `from` that lands on `to`. Pairs
/// closer than the larger element diagonal are not coupled.
#[inline]
fn element_to_element(from: &SurfaceElement, to: &SurfaceElement) -> f64 {
    let v = to.centre - from.centre;
    let d2 = v.norm_squared();
    let min_d = from.diagonal.max(to.diagonal);
    if d2 < min_d * min_d {
        return 0.0;
    }
    let travel = v * (1.0 / d2.sqrt());
    let cos_in = -to.normal.dot(travel);
    if cos_in <= 0.0 {
        return 0.0;
    }
    element_pattern(from, travel) * cos_in * to.area / d2
}

/// Received power (W) after exactly one diffuse reflection.
pub fn first_order_power(
    src: &LambertianSource,
    rx: &ReceiverAperture,
    elements: &[SurfaceElement],
) -> Reflected {
    let power = elements
        .iter()
        .map(|e| {
            let on = source_to_element(src, e);
            if on == 0.0 || e.reflectivity == 0.0 {
                0.0
            } else {
                on * e.reflectivity * element_to_receiver(e, rx)
            }
        })
        .sum();
    Reflected {
        power,
        no_elements: elements.is_empty(),
    }
}

/// Received power (W) after exactly two diffuse reflections.
pub fn second_order_power(
    src: &LambertianSource,
    rx: &ReceiverAperture,
    elements: &[SurfaceElement],
) -> Reflected {
    let out: Vec<f64> = elements
        .iter()
        .map(|e| element_to_receiver(e, rx) * e.reflectivity)
        .collect();
    let mut power = 0.0;
    for (i, first) in elements.iter().enumerate() {
        let on = source_to_element(src, first) * first.reflectivity;
        if on == 0.0 {
            continue;
        }
        for (j, second) in elements.iter().enumerate() {
            if i == j || out[j] == 0.0 {
                continue;
            }
            power += on * element_to_element(first, second) * out[j];
        }
    }
    Reflected {
        power,
        no_elements: elements.is_empty(),
    }
}

/// Per-source surface excitation: power re-emitted by each element.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceField {
    /// After one bounce, over the fine elements.
    pub first: Vec<f64>,
    /// After two bounces, over the coarse elements.
    pub second: Vec<f64>,
}

/// Sparse coupling of surface elements into one aperture, in element order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReceiverView {
    pub first: Vec<(u32, f64)>,
    pub second: Vec<(u32, f64)>,
}

/// Discretized room ready for repeated power evaluations.
#[derive(Debug, Clone)]
pub struct Scene {
    pub room: Room,
    pub policy: DiscretizationPolicy,
    pub max_order: ReflectionOrder,
    fine: Vec<SurfaceElement>,
    coarse: Vec<SurfaceElement>,
}

impl Scene {
    pub fn new(room: Room, policy: DiscretizationPolicy, max_order: ReflectionOrder) -> Result<Self, PropagationError> {
        policy.validate()?;
        let fine = if max_order >= ReflectionOrder::First {
            discretize_room(&room, policy.first_order_element)?
        } else {
            room.validate()?;
            Vec::new()
        };
        let coarse = if max_order >= ReflectionOrder::Second {
            discretize_room(&room, policy.second_order_element)?
        } else {
            Vec::new()
        };
        Ok(Scene {
            room,
            policy,
            max_order,
            fine,
            coarse,
        })
    }

    pub fn first_order_elements(&self) -> &[SurfaceElement] {
        &self.fine
    }

    pub fn second_order_elements(&self) -> &[SurfaceElement] {
        &self.coarse
    }

    /// Surface excitation for each source. The second-order pass is batched
    /// across sources so each element pair is visited once.
    pub fn illuminate(&self, sources: &[LambertianSource]) -> Vec<SourceField> {
        let first: Vec<Vec<f64>> = sources
            .par_iter()
            .map(|s| {
                self.fine
                    .iter()
                    .map(|e| reemitted(s, e))
                    .collect()
            })
            .collect();

        let ns = sources.len();
        let mut second = vec![vec![0.0; self.coarse.len()]; ns];
        if !self.coarse.is_empty() && ns > 0 {
            // first-hop excitation, element-major
            let hop: Vec<f64> = self
                .coarse
                .iter()
                .flat_map(|e| sources.iter().map(move |s| reemitted(s, e)))
                .collect();
            let columns: Vec<Vec<f64>> = self
                .coarse
                .par_iter()
                .enumerate()
                .map(|(j, to)| {
                    let mut acc = vec![0.0; ns];
                    if to.reflectivity == 0.0 {
                        return acc;
                    }
                    for (i, from) in self.coarse.iter().enumerate() {
                        if i == j {
                            continue;
                        }
                        let k = element_to_element(from, to);
                        if k == 0.0 {
                            continue;
                        }
                        let row = &hop[i * ns..(i + 1) * ns];
                        for (a, &h) in acc.iter_mut().zip(row) {
                            *a += h * k;
                        }
                    }
                    for a in &mut acc {
                        *a *= to.reflectivity;
                    }
                    acc
                })
                .collect();
            for (j, col) in columns.into_iter().enumerate() {
                for (s, v) in col.into_iter().enumerate() {
                    second[s][j] = v;
                }
            }
        }

        first
            .into_iter()
            .zip(second)
            .map(|(first, second)| SourceField { first, second })
            .collect()
    }

    /// Element couplings into `rx`, keeping only the non-zero ones.
    pub fn view(&self, rx: &ReceiverAperture) -> ReceiverView {
        let sparse = |els: &[SurfaceElement]| -> Vec<(u32, f64)> {
            els.iter()
                .enumerate()
                .filter_map(|(i, e)| {
                    let g = element_to_receiver(e, rx);
                    (g != 0.0).then_some((i as u32, g))
                })
                .collect()
        };
        ReceiverView {
            first: sparse(&self.fine),
            second: sparse(&self.coarse),
        }
    }

    /// Power budget for a source whose field was computed by [`Scene::illuminate`].
    pub fn budget(
        &self,
        src: &LambertianSource,
        field: &SourceField,
        view: &ReceiverView,
        rx: &ReceiverAperture,
    ) -> Result<PathBudget, PropagationError> {
        let los = los_gain(src, rx)? * src.optical_power;
        let first = view.first.iter().map(|&(i, g)| field.first[i as usize] * g).sum();
        let second = view.second.iter().map(|&(i, g)| field.second[i as usize] * g).sum();
        Ok(PathBudget::new(los, first, second))
    }

    /// Convenience single evaluation; prefer [`Scene::illuminate`] plus
    /// [`Scene::budget`] when reusing sources.
    pub fn received_power(&self, src: &LambertianSource, rx: &ReceiverAperture) -> Result<PathBudget, PropagationError> {
        let field = self.illuminate(std::slice::from_ref(src)).remove(0);
        self.budget(src, &field, &self.view(rx), rx)
    }
}

#[inline]
fn reemitted(src: &LambertianSource, e: &SurfaceElement) -> f64 {
    if e.reflectivity == 0.0 {
        0.0
    } else {
        source_to_element(src, e) * e.reflectivity
    }
}

/// Line-of-sight plus first- and second-order received power.
pub fn received_power(
    src: &LambertianSource,
    rx: &ReceiverAperture,
    policy: DiscretizationPolicy,
    room: &Room,
) -> Result<PathBudget, PropagationError> {
    Scene::new(*room, policy, ReflectionOrder::Second)?.received_power(src, rx)
}
