//! Scenario grids: every combination of the swept values, each run under
//! all requested pricing modes on the same request stream.

use std::time::Instant;

use mms_core::sim::{compare_modes, replay_experiment, Comparison};
use mms_core::{PricingMode, Request, Scenario};
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Emit {
    pub tables: bool,
    pub price_cdf: bool,
    pub gap_series: bool,
    pub event_log: bool,
}

impl Default for Emit {
    fn default() -> Self {
        Self { tables: true, price_cdf: true, gap_series: true, event_log: false }
    }
}

/// A fully resolved experiment grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub base: Scenario,
    pub lambdas: Vec<f64>,
    pub capacities: Vec<usize>,
    /// WTP variances.
    pub sigmas: Vec<f64>,
    pub modes: Vec<PricingMode>,
    pub seeds: Vec<u64>,
    pub emit: Emit,
    /// Recorded customers per day. When set, every cell replays them and
    /// the arrival rate and WTP variance of the cell are not used.
    pub replay: Option<Vec<Vec<Request>>>,
}

impl RunSpec {
    /// A one-cell grid over the base scenario's own values.
    pub fn single(base: Scenario, modes: Vec<PricingMode>) -> Self {
        Self {
            lambdas: vec![base.lambda_per_hour],
            capacities: vec![base.capacity],
            sigmas: vec![base.wtp.sigma],
            seeds: vec![base.seed],
            modes,
            emit: Emit::default(),
            replay: None,
            base,
        }
    }

    /// Cells in lexicographic order of (λ, capacity, σ, seed).
    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for &lambda in &self.lambdas {
            for &capacity in &self.capacities {
                for &sigma in &self.sigmas {
                    for &seed in &self.seeds {
                        cells.push(Cell { id: cells.len(), lambda, capacity, sigma, seed });
                    }
                }
            }
        }
        cells
    }

    pub fn scenario(&self, cell: &Cell) -> Scenario {
        let mut s = self.base.clone();
        s.lambda_per_hour = cell.lambda;
        s.capacity = cell.capacity;
        s.wtp.sigma = cell.sigma;
        s.seed = cell.seed;
        s.record_events = self.emit.event_log;
        s
    }

    /// Checks every cell before anything runs.
    pub fn validate(&self) -> Result<(), String> {
        if self.modes.is_empty() {
            return Err("no pricing modes selected".into());
        }
        let cells = self.cells();
        if cells.is_empty() {
            return Err("the grid has no cells".into());
        }
        for c in &cells {
            self.scenario(c)
                .validate()
                .map_err(|e| format!("cell {} (lambda {}, capacity {}, sigma {}, seed {}): {e}", c.id, c.lambda, c.capacity, c.sigma, c.seed))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub id: usize,
    pub lambda: f64,
    pub capacity: usize,
    pub sigma: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub cell: Cell,
    pub outcome: Result<Comparison, String>,
    pub elapsed_s: f64,
}

/// Runs all cells on a pool of `workers` threads. Results come back in
/// cell order whatever the scheduling.
pub fn run(spec: &RunSpec, workers: usize) -> anyhow::Result<Vec<CellResult>> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build()?;
    let cells = spec.cells();
    Ok(pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                let t = Instant::now();
                let outcome = match &spec.replay {
                    Some(days) => replay_modes(&spec.scenario(cell), &spec.modes, days),
                    None => compare_modes(&spec.scenario(cell), &spec.modes),
                }
                .map_err(|e| e.to_string());
                CellResult { cell: *cell, outcome, elapsed_s: t.elapsed().as_secs_f64() }
            })
            .collect()
    }))
}

fn replay_modes(scenario: &Scenario, modes: &[PricingMode], days: &[Vec<Request>]) -> mms_core::Result<Comparison> {
    let mut reports = Vec::with_capacity(modes.len());
    for &mode in modes {
        let mut s = scenario.clone();
        s.pricing.mode = mode;
        reports.push((mode, replay_experiment(&s, days)?));
    }
    Ok(Comparison { reports })
}
