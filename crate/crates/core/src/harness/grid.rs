//! Cartesian grids over momentum, learning rate and minibatch size.
//!
//! Every cell runs once per seed. The seed value is used directly as the
//! run seed, so all cells see the same random streams for a given seed and
//! differences between cells come from the settings alone.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::run::{run_experiment, RunOutput};
use super::trace::{fmt_f64, write_trace};
use crate::diagnostics::median;
use crate::error::{Error, Result};

/// Learning rates used when a grid does not name any.
pub const DEFAULT_LEARNING_RATES: [f64; 4] = [0.3, 0.1, 0.03, 0.01];
/// Momenta used when a grid does not name any.
pub const DEFAULT_MOMENTA: [f64; 4] = [0.0, 0.5, 0.9, 0.99];

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub momenta: Vec<f64>,
    pub learning_rates: Vec<f64>,
    /// Empty means the base config's batch size.
    pub batch_sizes: Vec<usize>,
    pub seeds: Vec<u64>,
}

impl GridSpec {
    fn batch_axis(&self, base: &ExperimentConfig) -> Vec<usize> {
        if self.batch_sizes.is_empty() {
            vec![base.batch_size]
        } else {
            self.batch_sizes.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub momentum: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl Cell {
    fn apply(&self, base: &ExperimentConfig, seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            momentum: self.momentum,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            seed,
            ..base.clone()
        }
    }

    pub fn trace_name(&self, seed: u64) -> String {
        format!(
            "cell_m{}_lr{}_k{}_s{}.csv",
            self.momentum, self.learning_rate, self.batch_size, seed
        )
    }
}

/// Medians over the seeds of one cell. Runs that diverged or failed are
/// counted in `failures` and left out of the medians; a run that never
/// reaches the threshold counts as infinitely many iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub cell: Cell,
    pub runs: usize,
    pub failures: usize,
    pub errors: Vec<String>,
    pub median_final_risk: Option<f64>,
    pub median_best_risk: Option<f64>,
    pub median_final_accuracy: Option<f64>,
    pub median_iterations_to_threshold: Option<f64>,
    pub median_samples_to_threshold: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct GridResult {
    pub cells: Vec<CellSummary>,
    /// `runs[cell][seed]` in grid and seed-list order.
    pub runs: Vec<Vec<Result<RunOutput, String>>>,
}

pub fn grid_cells(base: &ExperimentConfig, spec: &GridSpec) -> Vec<Cell> {
    let mut cells = Vec::new();
    for &batch_size in &spec.batch_axis(base) {
        for &momentum in &spec.momenta {
            for &learning_rate in &spec.learning_rates {
                cells.push(Cell {
                    momentum,
                    learning_rate,
                    batch_size,
                });
            }
        }
    }
    cells
}

/// Run every cell for every seed. Per-run failures are recorded, not fatal.
/// With `out_dir` set, each run's trace and `summary.csv` are written there.
pub fn run_grid(base: &ExperimentConfig, spec: &GridSpec, out_dir: Option<&Path>) -> Result<GridResult> {
    if spec.momenta.is_empty() || spec.learning_rates.is_empty() || spec.seeds.is_empty() {
        return Err(Error::config("grid axes and seed list must be non-empty"));
    }
    if spec.batch_sizes.contains(&0) {
        return Err(Error::config("grid batch sizes must be >= 1"));
    }
    let cells = grid_cells(base, spec);
    let jobs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| spec.seeds.iter().map(move |&s| (c, s)))
        .collect();
    let outputs: Vec<Result<RunOutput, String>> = jobs
        .par_iter()
        .map(|&(c, seed)| run_experiment(&cells[c].apply(base, seed)).map_err(|e| e.to_string()))
        .collect();

    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (&(c, seed), out) in jobs.iter().zip(&outputs) {
            if let Ok(out) = out {
                write_trace(&out.records, dir.join(cells[c].trace_name(seed)))?;
            }
        }
    }

    let per_seed = spec.seeds.len();
    let mut runs: Vec<Vec<Result<RunOutput, String>>> = Vec::with_capacity(cells.len());
    let mut it = outputs.into_iter();
    for _ in 0..cells.len() {
        runs.push(it.by_ref().take(per_seed).collect());
    }
    let summaries = cells
        .iter()
        .zip(&runs)
        .map(|(cell, rs)| summarize(*cell, rs))
        .collect();
    let result = GridResult {
        cells: summaries,
        runs,
    };
    if let Some(dir) = out_dir {
        write_summary(&result.cells, dir.join("summary.csv"))?;
    }
    Ok(result)
}

fn summarize(cell: Cell, runs: &[Result<RunOutput, String>]) -> CellSummary {
    let ok: Vec<&RunOutput> = runs
        .iter()
        .filter_map(|r| r.as_ref().ok())
        .filter(|r| !r.summary.diverged)
        .collect();
    let errors = runs.iter().filter_map(|r| r.as_ref().err().cloned()).collect();
    let med = |f: &dyn Fn(&RunOutput) -> Option<f64>| median(ok.iter().filter_map(|r| f(r)).collect());
    let to_threshold = |f: &dyn Fn(&RunOutput) -> Option<u64>| {
        median(
            ok.iter()
                .map(|r| f(r).map_or(f64::INFINITY, |v| v as f64))
                .collect(),
        )
    };
    CellSummary {
        cell,
        runs: runs.len(),
        failures: runs.len() - ok.len(),
        errors,
        median_final_risk: med(&|r| r.summary.final_risk),
        median_best_risk: med(&|r| r.summary.best_risk),
        median_final_accuracy: med(&|r| r.summary.final_accuracy),
        median_iterations_to_threshold: to_threshold(&|r| r.summary.iterations_to_threshold),
        median_samples_to_threshold: to_threshold(&|r| r.summary.samples_to_threshold),
    }
}

pub const SUMMARY_HEADER: [&str; 10] = [
    "momentum",
    "learning_rate",
    "batch_size",
    "runs",
    "failures",
    "median_final_risk",
    "median_best_risk",
    "median_final_accuracy",
    "median_iterations_to_threshold",
    "median_samples_to_threshold",
];

pub fn write_summary(cells: &[CellSummary], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io = |e: std::io::Error| Error::io(path, e);
    let file = std::fs::File::create(path).map_err(io)?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    let to_io = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    w.write_record(SUMMARY_HEADER).map_err(to_io)?;
    for c in cells {
        w.write_record([
            fmt_f64(c.cell.momentum),
            fmt_f64(c.cell.learning_rate),
            c.cell.batch_size.to_string(),
            c.runs.to_string(),
            c.failures.to_string(),
            opt(c.median_final_risk),
            opt(c.median_best_risk),
            opt(c.median_final_accuracy),
            opt(c.median_iterations_to_threshold),
            opt(c.median_samples_to_threshold),
        ])
        .map_err(to_io)?;
    }
    w.into_inner()
        .map_err(|e| io(e.into_error()))?
        .flush()
        .map_err(io)
}

/// Trace file paths a grid run writes into `dir`.
pub fn trace_paths(base: &ExperimentConfig, spec: &GridSpec, dir: &Path) -> Vec<PathBuf> {
    grid_cells(base, spec)
        .iter()
        .flat_map(|c| spec.seeds.iter().map(move |&s| dir.join(c.trace_name(s))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::OptimizerKind;

    fn base() -> ExperimentConfig {
        ExperimentConfig {
            optimizer: OptimizerKind::Momentum,
            theta0: Some(vec![3.0]),
            train_set_size: 50,
            epochs: 2,
            batch_size: 5,
            ..Default::default()
        }
    }

    #[test]
    fn one_by_one_grid_matches_single_run() {
        let b = base();
        let spec = GridSpec {
            momenta: vec![b.momentum],
            learning_rates: vec![b.learning_rate],
            batch_sizes: vec![],
            seeds: vec![b.seed],
        };
        let g = run_grid(&b, &spec, None).unwrap();
        let single = run_experiment(&b).unwrap();
        assert_eq!(g.runs[0][0].as_ref().unwrap(), &single);
    }

    #[test]
    fn medians_invariant_under_seed_permutation() {
        let b = base();
        let spec = GridSpec {
            momenta: vec![0.0, 0.5],
            learning_rates: vec![0.05, 0.2],
            batch_sizes: vec![],
            seeds: vec![1, 2, 3, 4, 5],
        };
        let a = run_grid(&b, &spec, None).unwrap();
        let spec2 = GridSpec {
            seeds: vec![4, 2, 5, 1, 3],
            ..spec
        };
        let c = run_grid(&b, &spec2, None).unwrap();
        assert_eq!(a.cells, c.cells);
    }

    #[test]
    fn failing_cells_do_not_stop_the_grid() {
        let b = base();
        let spec = GridSpec {
            momenta: vec![0.0, 1.5],
            learning_rates: vec![0.1],
            batch_sizes: vec![],
            seeds: vec![1, 2],
        };
        let g = run_grid(&b, &spec, None).unwrap();
        assert_eq!(g.cells[0].failures, 0);
        assert_eq!(g.cells[1].failures, 2);
        assert_eq!(g.cells[1].errors.len(), 2);
        assert_eq!(g.cells[1].median_final_risk, None);
    }

    #[test]
    fn empty_axes_rejected() {
        let spec = GridSpec {
            momenta: vec![],
            learning_rates: vec![0.1],
            batch_sizes: vec![],
            seeds: vec![1],
        };
        assert!(run_grid(&base(), &spec, None).is_err());
    }
}
