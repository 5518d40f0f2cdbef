//! Deterministic simulator for co-existing optical wireless cells in an
//! empty room: an infrared Micro cell, visible-light Pico and Atto cells fed
//! by ceiling angle diversity transmitters, and RYGB illumination units.
//!
//! Received power is computed over the line-of-sight path and first- and
//! second-order Lambertian reflections; the receiver is a seven-branch angle
//! diversity receiver evaluated with selection and maximum ratio combining.

pub mod coexistence;
pub mod config;
pub mod emitters;
pub mod geometry;
pub mod grid;
pub mod oracle;
pub mod photometry;
pub mod propagation;
pub mod receiver;

pub use coexistence::{CoexistenceScenario, Simulation};
pub use config::{load_scenario, ScenarioConfig};
pub use emitters::{LambertianSource, SystemId};
pub use geometry::{Room, Vec3};
pub use grid::{Combining, Quantity, ScalarGrid};

/// Runs `f` on a worker pool of `threads` threads (0 = one per core).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}
