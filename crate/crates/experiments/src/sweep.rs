//! Parallel execution of a sweep.

use crate::config::ExperimentConfig;
use crate::table::{SummaryRow, SweepTable};
use crate::ExperimentError;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::panic::{catch_unwind, AssertUnwindSafe};
use wpfl_core::sca::RunStatus;
use wpfl_core::{run_benchmark, sample_instance, ProblemInstance, RunOptions, Scheme};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RunOutcome {
    Done { objective: f64, iterations: usize, status: RunStatus, wall_time_s: f64 },
    Failed { error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    /// Index into the sweep grid.
    pub point: usize,
    pub sweep_value: f64,
    pub scheme: Scheme,
    pub realization: usize,
    pub seed: u64,
    pub outcome: RunOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub runs: Vec<RunRecord>,
    pub table: SweepTable,
}

impl SweepResult {
    pub fn failures(&self) -> usize {
        self.runs.iter().filter(|r| matches!(r.outcome, RunOutcome::Failed { .. })).count()
    }
}

/// Network realization `realization` at grid point `point`.
pub fn instance_at(config: &ExperimentConfig, point: usize, realization: usize) -> Result<ProblemInstance, String> {
    let value = *config.sweep.grid.get(point).ok_or_else(|| format!("grid has no point {point}"))?;
    let p = config.point(value).map_err(|e| e.to_string())?;
    let seed = config.seed_base.wrapping_add(realization as u64);
    sample_instance(&p.system, &p.learning, &p.devices, &p.channel, seed).map_err(|e| e.to_string())
}

fn execute(config: &ExperimentConfig, point: usize, scheme: Scheme, realization: usize) -> RunOutcome {
    let opts = RunOptions { eps: config.stop.eps, max_iter: config.stop.max_iter, ..RunOptions::default() };
    let attempt = catch_unwind(AssertUnwindSafe(|| {
        let instance = instance_at(config, point, realization)?;
        let started = std::time::Instant::now();
        let trace = run_benchmark(&instance, scheme, &opts).map_err(|e| e.to_string())?;
        Ok::<_, String>(RunOutcome::Done {
            objective: trace.final_objective(),
            iterations: trace.iteration_count(),
            status: trace.status,
            wall_time_s: started.elapsed().as_secs_f64(),
        })
    }));
    match attempt {
        Ok(Ok(done)) => done,
        Ok(Err(error)) => RunOutcome::Failed { error },
        Err(panic) => {
            let error = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "run panicked".into());
            RunOutcome::Failed { error: format!("panic: {error}") }
        }
    }
}

/// Runs the sweep on rayon's global pool.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepResult, ExperimentError> {
    config.validate()?;
    let jobs: Vec<(usize, Scheme, usize)> = (0..config.sweep.grid.len())
        .flat_map(|p| config.schemes.iter().flat_map(move |&s| (0..config.realizations).map(move |r| (p, s, r))))
        .collect();
    let runs: Vec<RunRecord> = jobs
        .par_iter()
        .map(|&(point, scheme, realization)| RunRecord {
            point,
            sweep_value: config.sweep.grid[point],
            scheme,
            realization,
            seed: config.seed_base.wrapping_add(realization as u64),
            outcome: execute(config, point, scheme, realization),
        })
        .collect();
    let table = aggregate(config, &runs)?;
    Ok(SweepResult { runs, table })
}

/// [`run_sweep`] on a private pool of `workers` threads.
pub fn run_sweep_with(config: &ExperimentConfig, workers: usize) -> Result<SweepResult, ExperimentError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| ExperimentError::Pool(e.to_string()))?;
    pool.install(|| run_sweep(config))
}

fn aggregate(config: &ExperimentConfig, runs: &[RunRecord]) -> Result<SweepTable, ExperimentError> {
    let mut rows = Vec::new();
    for (point, &value) in config.sweep.grid.iter().enumerate() {
        for &scheme in &config.schemes {
            let mut times = Vec::new();
            let mut iters = Vec::new();
            let mut n_fail = 0;
            let mut group: Vec<&RunRecord> =
                runs.iter().filter(|r| r.point == point && r.scheme == scheme).collect();
            group.sort_by_key(|r| r.realization);
            for r in group {
                match &r.outcome {
                    RunOutcome::Done { objective, iterations, .. } => {
                        times.push(*objective);
                        iters.push(*iterations as f64);
                    }
                    RunOutcome::Failed { .. } => n_fail += 1,
                }
            }
            rows.push(SummaryRow {
                sweep_value: value,
                scheme,
                mean_t: mean(&times),
                std_t: std_dev(&times),
                mean_iters: mean(&iters),
                n_ok: times.len(),
                n_fail,
            });
        }
    }
    Ok(SweepTable { variable: config.sweep.variable, learning: config.base.learning.derive()?, rows })
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Sample standard deviation; zero for a single value.
fn std_dev(v: &[f64]) -> Option<f64> {
    let m = mean(v)?;
    if v.len() < 2 {
        return Some(0.0);
    }
    Some((v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt())
}
