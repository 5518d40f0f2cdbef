//! Brute-force reference for received power, used to check [`crate::propagation`].
//!
//! Everything is recomputed from angles inside plain nested loops: no
//! factoring of the path sums, no sparse views, no shared kernels with the
//! production route. O(E²) in the element count, so keep scenes small.

use std::f64::consts::PI;

use crate::emitters::LambertianSource;
use crate::geometry::{discretize_room, Room, Vec3};
use crate::propagation::ReceiverAperture;

fn angle_between(a: Vec3, b: Vec3) -> f64 {
    let c = a.dot(b) / (a.norm() * b.norm());
    c.clamp(-1.0, 1.0).acos()
}

/// Lambertian point-to-patch transfer from an emitter at `from` (axis
/// `axis`, order `n`) to a patch at `to` with normal `normal` and area
/// `area`. Returns zero when either end faces away.
fn transfer(from: Vec3, axis: Vec3, n: f64, to: Vec3, normal: Vec3, area: f64) -> f64 {
    let ray = to - from;
    let dist = ray.norm();
    let emit = angle_between(axis, ray);
    let incident = angle_between(normal, -ray);
    if emit >= PI / 2.0 || incident >= PI / 2.0 {
        return 0.0;
    }
    (n + 1.0) / (2.0 * PI) * emit.cos().powf(n) * incident.cos() * area / (dist * dist)
}

/// Total received power (W): LOS plus first- and second-order reflections,
/// with both orders tiled at `element_size`.
pub fn brute_force_power_oracle(
    src: &LambertianSource,
    rx: &ReceiverAperture,
    room: &Room,
    element_size: f64,
) -> f64 {
    let elements = discretize_room(room, element_size).expect("valid oracle scene");
    let fov = rx.fov_deg.to_radians();
    let seen = |from: Vec3| angle_between(rx.orientation, from - rx.position) <= fov;

    let mut los = 0.0;
    if seen(src.position) {
        los = src.optical_power
            * transfer(src.position, src.orientation, src.order_n, rx.position, rx.orientation, rx.area);
    }

    let mut first = 0.0;
    for e in &elements {
        let incident = src.optical_power
            * transfer(src.position, src.orientation, src.order_n, e.centre, e.normal, e.area);
        if seen(e.centre) {
            first += incident
                * e.reflectivity
                * transfer(e.centre, e.normal, 1.0, rx.position, rx.orientation, rx.area);
        }
    }

    let mut second = 0.0;
    for (i, a) in elements.iter().enumerate() {
        let incident = src.optical_power
            * transfer(src.position, src.orientation, src.order_n, a.centre, a.normal, a.area);
        for (j, b) in elements.iter().enumerate() {
            if i == j {
                continue;
            }
            let gap = b.centre - a.centre;
            if gap.norm() < a.diagonal.max(b.diagonal) {
                continue;
            }
            if !seen(b.centre) {
                continue;
            }
            let between = transfer(a.centre, a.normal, 1.0, b.centre, b.normal, b.area);
            let out = transfer(b.centre, b.normal, 1.0, rx.position, rx.orientation, rx.area);
            second += incident * a.reflectivity * between * b.reflectivity * out;
        }
    }
    los + first + second
}
