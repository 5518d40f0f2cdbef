//! Co-existence sweeps: serving-cell selection, interference sets and the
//! SNR / SINR / MRC-gain maps over the communication floor.
//!
//! [`Simulation::new`] does the expensive work once: it discretizes the room,
//! computes the surface excitation of every communication source, and
//! tabulates the power budget of every (grid point, ADR branch, source)
//! triple. All maps are then cheap reductions over that table. Each grid
//! point is reduced sequentially in a fixed order, so results do not depend
//! on the number of worker threads.

use rayon::prelude::*;
use thiserror::Error;

use crate::config::ScenarioConfig;
use crate::emitters::{build_layout, EmitterError, LambertianSource, SystemId, SystemLayout};
use crate::geometry::{cf_grid, CfGrid, GeometryError, Room, Vec3};
use crate::grid::{to_db, Combining, GridError, Quantity, ScalarGrid};
use crate::propagation::{PathBudget, PropagationError, Scene, SourceField};
use crate::receiver::{evaluate_branches, AdrEvaluation, AngleDiversityReceiver, NoiseParams, ReceiverError};

pub use crate::grid::{summarize, Summary};

#[derive(Debug, Error)]
pub enum CoexistenceError {
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Emitter(#[from] EmitterError),
    #[error(transparent)]
    Propagation(#[from] PropagationError),
    #[error(transparent)]
    Receiver(#[from] ReceiverError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Relative tolerance under which two serving candidates count as tied.
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct CellSystem {
    pub id: SystemId,
    pub sources: Vec<LambertianSource>,
    pub noise: NoiseParams,
}

/// A serving system and the set of systems interfering with it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoexistenceScenario {
    pub serving: SystemId,
    pub interfering: Vec<SystemId>,
}

impl CoexistenceScenario {
    pub fn new(serving: SystemId, interfering: &[SystemId]) -> Result<Self, CoexistenceError> {
        if serving == SystemId::Illumination {
            return Err(CoexistenceError::Scenario("illumination units do not serve users".into()));
        }
        let mut list: Vec<SystemId> = Vec::with_capacity(interfering.len());
        for &s in interfering {
            if s == serving {
                return Err(CoexistenceError::Scenario(format!("{s} cannot both serve and interfere")));
            }
            if s == SystemId::Illumination {
                return Err(CoexistenceError::Scenario("illumination is not an interfering cell system".into()));
            }
            if list.contains(&s) {
                return Err(CoexistenceError::Scenario(format!("{s} listed twice as interferer")));
            }
            list.push(s);
        }
        list.sort();
        Ok(CoexistenceScenario { serving, interfering: list })
    }

    pub fn snr(serving: SystemId) -> Result<Self, CoexistenceError> {
        Self::new(serving, &[])
    }

    /// Every serving system paired with every non-empty set of the others.
    pub fn all_interference_combinations() -> Vec<CoexistenceScenario> {
        let mut out = Vec::new();
        for serving in SystemId::CELLS {
            let others: Vec<SystemId> = SystemId::CELLS.into_iter().filter(|&s| s != serving).collect();
            for set in [vec![others[0]], vec![others[1]], others.clone()] {
                out.push(CoexistenceScenario::new(serving, &set).expect("valid combination"));
            }
        }
        out
    }

    /// Short label such as `pico_vs_micro-atto`.
    pub fn label(&self) -> String {
        if self.interfering.is_empty() {
            self.serving.name().to_string()
        } else {
            let names: Vec<&str> = self.interfering.iter().map(|s| s.name()).collect();
            format!("{}_vs_{}", self.serving, names.join("-"))
        }
    }
}

/// Picks the candidate with the largest power; candidates within
/// [`TIE_TOLERANCE`] of the maximum resolve to the lowest index. The flag is
/// set when every candidate delivers zero power.
pub fn select_serving(totals: &[f64]) -> (usize, bool) {
    let max = totals.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return (0, true);
    }
    let idx = totals
        .iter()
        .position(|&p| p >= max * (1.0 - TIE_TOLERANCE))
        .unwrap_or(0);
    (idx, false)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServingChoice {
    /// Index within the system's source list.
    pub index: usize,
    pub source: LambertianSource,
    /// No source of the system reaches this position.
    pub unreachable: bool,
}

/// Power budget of every (grid point, branch, source) triple.
#[derive(Debug, Clone)]
struct ChannelTable {
    branches: usize,
    sources: usize,
    budgets: Vec<PathBudget>,
}

impl ChannelTable {
    fn at(&self, point: usize, branch: usize, source: usize) -> &PathBudget {
        &self.budgets[(point * self.branches + branch) * self.sources + source]
    }
}

/// A fully prepared scenario: geometry, sources, receiver and channel table.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub config: ScenarioConfig,
    pub room: Room,
    pub layout: SystemLayout,
    pub grid: CfGrid,
    pub systems: Vec<CellSystem>,
    scene: Scene,
    /// micro, then pico, then atto; `offsets[k]` is where system k starts
    sources: Vec<LambertianSource>,
    offsets: [usize; 4],
    fields: Vec<SourceField>,
    table: ChannelTable,
}

impl Simulation {
    /// Builds the scenario on the configured floor lattice.
    pub fn new(config: &ScenarioConfig) -> Result<Self, CoexistenceError> {
        let room = config.room();
        let grid = cf_grid(&room, config.run.grid_step)?;
        Self::with_grid(config, grid)
    }

    /// Builds the scenario on an explicit lattice.
    pub fn with_grid(config: &ScenarioConfig, grid: CfGrid) -> Result<Self, CoexistenceError> {
        let room = config.room();
        let layout = build_layout(config)?;
        let scene = Scene::new(room, config.policy(), config.reflection_order())?;
        let systems: Vec<CellSystem> = SystemId::CELLS
            .into_iter()
            .map(|id| CellSystem {
                id,
                sources: layout.sources(id).to_vec(),
                noise: *config.noise.get(id).expect("cell system"),
            })
            .collect();
        for s in &systems {
            s.noise.validate()?;
        }
        let mut sources = Vec::new();
        let mut offsets = [0; 4];
        for (k, s) in systems.iter().enumerate() {
            offsets[k] = sources.len();
            sources.extend_from_slice(&s.sources);
        }
        offsets[3] = sources.len();

        let fields = scene.illuminate(&sources);
        let probe = AngleDiversityReceiver::new(Vec3::ZERO, &config.receiver)?;
        let branches = probe.len();
        let per_point: Result<Vec<Vec<PathBudget>>, CoexistenceError> = grid
            .points
            .par_iter()
            .map(|&p| {
                let adr = AngleDiversityReceiver::new(p, &config.receiver)?;
                let mut row = Vec::with_capacity(branches * sources.len());
                for ap in adr.apertures() {
                    let view = scene.view(ap);
                    for (src, field) in sources.iter().zip(&fields) {
                        row.push(scene.budget(src, field, &view, ap)?);
                    }
                }
                Ok(row)
            })
            .collect();
        let budgets = per_point?.into_iter().flatten().collect();
        let table = ChannelTable {
            branches,
            sources: sources.len(),
            budgets,
        };
        Ok(Simulation {
            config: config.clone(),
            room,
            layout,
            grid,
            systems,
            scene,
            sources,
            offsets,
            fields,
            table,
        })
    }

    fn slot(id: SystemId) -> usize {
        match id {
            SystemId::Micro => 0,
            SystemId::Pico => 1,
            SystemId::Atto => 2,
            SystemId::Illumination => panic!("illumination is not a cell system"),
        }
    }

    pub fn system(&self, id: SystemId) -> &CellSystem {
        &self.systems[Self::slot(id)]
    }

    pub fn receiver_at(&self, position: Vec3) -> Result<AngleDiversityReceiver, CoexistenceError> {
        Ok(AngleDiversityReceiver::new(position, &self.config.receiver)?)
    }

    fn range(&self, id: SystemId) -> std::ops::Range<usize> {
        let k = Self::slot(id);
        self.offsets[k]..self.offsets[k + 1]
    }

    /// Per-branch budgets of one source (system-local index) at grid point `point`.
    pub fn branch_budgets(&self, point: usize, system: SystemId, index: usize) -> Vec<PathBudget> {
        let s = self.range(system).start + index;
        (0..self.table.branches).map(|b| *self.table.at(point, b, s)).collect()
    }

    /// Per-branch total power summed over a set of global source indices.
    fn branch_power(&self, point: usize, sources: impl Iterator<Item = usize> + Clone) -> Vec<f64> {
        (0..self.table.branches)
            .map(|b| sources.clone().map(|s| self.table.at(point, b, s).total).sum())
            .collect()
    }

    /// Serving source at grid point `point`: the one with the largest power
    /// summed over all ADR branches.
    pub fn serving_source(&self, system: SystemId, point: usize) -> ServingChoice {
        let range = self.range(system);
        let totals: Vec<f64> = range
            .clone()
            .map(|s| (0..self.table.branches).map(|b| self.table.at(point, b, s).total).sum())
            .collect();
        let (index, unreachable) = select_serving(&totals);
        ServingChoice {
            index,
            source: self.sources[range.start + index],
            unreachable,
        }
    }

    /// Serving and interfering per-branch powers for a scenario at a grid point.
    fn scenario_powers(&self, scenario: &CoexistenceScenario, point: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
        let choice = self.serving_source(scenario.serving, point);
        let serving_range = self.range(scenario.serving);
        let serving_global = serving_range.start + choice.index;
        let serving = self.branch_power(point, std::iter::once(serving_global));
        let mut interfering: Vec<Vec<f64>> = scenario
            .interfering
            .iter()
            .map(|&sys| self.branch_power(point, self.range(sys)))
            .collect();
        if self.config.link.intra_system_interference {
            let others = serving_range.filter(move |&s| s != serving_global);
            interfering.push(self.branch_power(point, others));
        }
        (serving, interfering)
    }

    /// ADR evaluation for a scenario at grid point `point`.
    pub fn evaluate_point(&self, scenario: &CoexistenceScenario, point: usize) -> Result<AdrEvaluation, CoexistenceError> {
        let (serving, interfering) = self.scenario_powers(scenario, point);
        let adr = self.receiver_at(self.grid.points[point])?;
        Ok(evaluate_branches(&adr, &serving, &interfering, &self.system(scenario.serving).noise)?)
    }

    /// ADR evaluation at an arbitrary receiver position (off the lattice).
    pub fn evaluate_at(&self, scenario: &CoexistenceScenario, position: Vec3) -> Result<AdrEvaluation, CoexistenceError> {
        let adr = self.receiver_at(position)?;
        let views: Vec<_> = adr.apertures().map(|a| self.scene.view(a)).collect();
        let power = |s: usize| -> Result<Vec<f64>, CoexistenceError> {
            adr.apertures()
                .zip(&views)
                .map(|(a, v)| Ok(self.scene.budget(&self.sources[s], &self.fields[s], v, a)?.total))
                .collect()
        };
        let sum = |range: std::ops::Range<usize>, skip: Option<usize>| -> Result<Vec<f64>, CoexistenceError> {
            let mut acc = vec![0.0; adr.len()];
            for s in range.filter(|&s| Some(s) != skip) {
                for (a, p) in acc.iter_mut().zip(power(s)?) {
                    *a += p;
                }
            }
            Ok(acc)
        };
        let range = self.range(scenario.serving);
        let per_source: Vec<Vec<f64>> = range.clone().map(power).collect::<Result<_, _>>()?;
        let totals: Vec<f64> = per_source.iter().map(|v| v.iter().sum()).collect();
        let (index, _) = select_serving(&totals);
        let mut interfering = scenario
            .interfering
            .iter()
            .map(|&sys| sum(self.range(sys), None))
            .collect::<Result<Vec<_>, _>>()?;
        if self.config.link.intra_system_interference {
            interfering.push(sum(range.clone(), Some(range.start + index))?);
        }
        Ok(evaluate_branches(
            &adr,
            &per_source[index],
            &interfering,
            &self.system(scenario.serving).noise,
        )?)
    }

    fn evaluate_all(&self, scenario: &CoexistenceScenario) -> Result<Vec<AdrEvaluation>, CoexistenceError> {
        (0..self.grid.len())
            .into_par_iter()
            .map(|k| self.evaluate_point(scenario, k))
            .collect()
    }

    fn map_from(&self, values: Vec<f64>, quantity: Quantity) -> Result<ScalarGrid, CoexistenceError> {
        Ok(ScalarGrid::new(self.grid.nx, self.grid.ny, self.grid.step, values, quantity)?)
    }

    /// Combined SINR map in dB; with no interferers this is the SNR map.
    pub fn sweep_map(&self, scenario: &CoexistenceScenario, combining: Combining) -> Result<ScalarGrid, CoexistenceError> {
        let evals = self.evaluate_all(scenario)?;
        let values = evals
            .iter()
            .map(|e| {
                to_db(match combining {
                    Combining::Sc => e.sc_sinr,
                    Combining::Mrc => e.mrc_sinr,
                })
            })
            .collect();
        let quantity = if scenario.interfering.is_empty() && !self.config.link.intra_system_interference {
            Quantity::SnrDb
        } else {
            Quantity::SinrDb
        };
        self.map_from(values, quantity)
    }

    /// Pointwise MRC minus SC, in dB.
    pub fn gain_map(&self, scenario: &CoexistenceScenario) -> Result<ScalarGrid, CoexistenceError> {
        let evals = self.evaluate_all(scenario)?;
        let values = evals.iter().map(|e| to_db(e.mrc_sinr) - to_db(e.sc_sinr)).collect();
        self.map_from(values, Quantity::GainDb)
    }

    /// SC map, MRC map and their difference from a single evaluation pass.
    pub fn combining_maps(&self, scenario: &CoexistenceScenario) -> Result<[ScalarGrid; 3], CoexistenceError> {
        let evals = self.evaluate_all(scenario)?;
        let q = if scenario.interfering.is_empty() && !self.config.link.intra_system_interference {
            Quantity::SnrDb
        } else {
            Quantity::SinrDb
        };
        let sc: Vec<f64> = evals.iter().map(|e| to_db(e.sc_sinr)).collect();
        let mrc: Vec<f64> = evals.iter().map(|e| to_db(e.mrc_sinr)).collect();
        let gain = mrc.iter().zip(&sc).map(|(m, s)| m - s).collect();
        Ok([self.map_from(sc, q)?, self.map_from(mrc, q)?, self.map_from(gain, Quantity::GainDb)?])
    }

    /// Serving source index (within the system) at every grid point.
    pub fn serving_map(&self, system: SystemId) -> Vec<ServingChoice> {
        (0..self.grid.len()).map(|k| self.serving_source(system, k)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tie_rule() {
        assert_eq!(select_serving(&[1.0, 3.0, 3.0]), (1, false));
        assert_eq!(select_serving(&[2.0, 2.0 * (1.0 + 1e-12), 1.0]), (0, false));
        assert_eq!(select_serving(&[0.0, 0.0]), (0, true));
        assert_eq!(select_serving(&[5.0]), (0, false));
    }

    #[test]
    fn scenario_rules() {
        assert!(CoexistenceScenario::new(SystemId::Pico, &[SystemId::Pico]).is_err());
        assert!(CoexistenceScenario::new(SystemId::Illumination, &[]).is_err());
        assert!(CoexistenceScenario::new(SystemId::Atto, &[SystemId::Illumination]).is_err());
        assert!(CoexistenceScenario::new(SystemId::Atto, &[SystemId::Micro, SystemId::Micro]).is_err());
        let s = CoexistenceScenario::new(SystemId::Atto, &[SystemId::Pico, SystemId::Micro]).unwrap();
        assert_eq!(s.interfering, vec![SystemId::Micro, SystemId::Pico]);
        assert_eq!(s.label(), "atto_vs_micro-pico");
        assert_eq!(CoexistenceScenario::snr(SystemId::Micro).unwrap().label(), "micro");
        let all = CoexistenceScenario::all_interference_combinations();
        assert_eq!(all.len(), 9);
        assert!(all.iter().all(|s| !s.interfering.contains(&s.serving)));
    }
}
