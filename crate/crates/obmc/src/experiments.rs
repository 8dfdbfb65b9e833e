//! Replicated sweeps over `(shape, r, gamma, n, estimator)` grids.
//!
//! Replicate `t` of a cell draws everything from the seed
//! `derive_seed([base_seed, m1, m2, r, gamma.to_bits(), n, estimator_id, t])`:
//! the truth from `derive_seed([seed, 0])`, the samples from
//! `derive_seed([seed, 1])` and the solver from `derive_seed([seed, 2])`.
//! In fixed-truth mode all replicates of a `(shape, r, gamma)` share the truth
//! seeded by `derive_seed([base_seed, m1, m2, r, gamma.to_bits()])`.
//!
//! The penalized estimator's `lambda` is chosen once per cell, by hold-out
//! selection on replicate 0 over `lambda_grid * sqrt((m1 + m2) / n)`, and
//! reused for every replicate of the cell.

use std::cmp::Ordering;
use std::fs::File;
use std::path::Path;
use std::time::Instant;

use obmc_core::rng::derive_seed;
use obmc_core::{
    generate_truth, risk_report, sample_observations, select_lambda, Estimator, SampleSet, Shape,
    SolverConfig, TruthMatrix,
};
use rayon::prelude::*;

use crate::config::{SweepConfig, TruthMode};
use crate::error::{Error, Result};
use crate::table;

/// Largest fraction of failed replicates a cell tolerates.
pub const MAX_FAILED_FRACTION: f64 = 0.2;

/// One point of the sweep grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellKey {
    pub estimator: Estimator,
    pub shape: Shape,
    pub rank: usize,
    pub gamma: f64,
    pub n: usize,
}

impl CellKey {
    /// Canonical order: estimator, m1, m2, r, gamma, n.
    pub fn canonical_cmp(&self, other: &Self) -> Ordering {
        self.estimator
            .cmp(&other.estimator)
            .then(self.shape.rows().cmp(&other.shape.rows()))
            .then(self.shape.cols().cmp(&other.shape.cols()))
            .then(self.rank.cmp(&other.rank))
            .then(self.gamma.total_cmp(&other.gamma))
            .then(self.n.cmp(&other.n))
    }

    /// Seed of replicate `t`.
    pub fn replicate_seed(&self, base_seed: u64, t: usize) -> u64 {
        derive_seed(&[
            base_seed,
            self.shape.rows() as u64,
            self.shape.cols() as u64,
            self.rank as u64,
            self.gamma.to_bits(),
            self.n as u64,
            self.estimator.id(),
            t as u64,
        ])
    }

    fn fixed_truth_seed(&self, base_seed: u64) -> u64 {
        derive_seed(&[
            base_seed,
            self.shape.rows() as u64,
            self.shape.cols() as u64,
            self.rank as u64,
            self.gamma.to_bits(),
        ])
    }
}

impl std::fmt::Display for CellKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {}x{} r={} gamma={} n={}",
            self.estimator.name(),
            self.shape.rows(),
            self.shape.cols(),
            self.rank,
            self.gamma,
            self.n
        )
    }
}

/// Metrics of a replicate whose fit succeeded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicateMetrics {
    pub excess: f64,
    pub risk: f64,
    pub bayes_risk: f64,
    pub frob_error_sq_normalized: f64,
    pub iterations: usize,
    pub converged: bool,
    pub runtime_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub seed: u64,
    pub margin_tau: f64,
    /// Penalty used; zero for the constrained estimators.
    pub lambda_used: f64,
    /// `None` when the fit failed numerically.
    pub metrics: Option<ReplicateMetrics>,
}

/// Replicate averages over the successful replicates of a cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub mean_excess: f64,
    pub stderr_excess: f64,
    pub mean_frob: f64,
    pub stderr_frob: f64,
    pub mean_risk: f64,
    pub mean_bayes_risk: f64,
    pub mean_margin_tau: f64,
    pub succeeded: usize,
    pub total: usize,
}

impl Aggregate {
    /// Recomputes the averages from replicate records.
    pub fn of(records: &[ReplicateRecord]) -> Self {
        let ok: Vec<&ReplicateMetrics> =
            records.iter().filter_map(|r| r.metrics.as_ref()).collect();
        let (mean_excess, stderr_excess) = mean_stderr(ok.iter().map(|m| m.excess));
        let (mean_frob, stderr_frob) = mean_stderr(ok.iter().map(|m| m.frob_error_sq_normalized));
        Self {
            mean_excess,
            stderr_excess,
            mean_frob,
            stderr_frob,
            mean_risk: mean_stderr(ok.iter().map(|m| m.risk)).0,
            mean_bayes_risk: mean_stderr(ok.iter().map(|m| m.bayes_risk)).0,
            mean_margin_tau: mean_stderr(records.iter().map(|r| r.margin_tau)).0,
            succeeded: ok.len(),
            total: records.len(),
        }
    }
}

/// Mean and standard error (sample deviation over `sqrt(k)`); the standard
/// error of a single value is zero and the mean of none is NaN.
pub fn mean_stderr(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let values: Vec<f64> = values.collect();
    let k = values.len();
    if k == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / k as f64;
    if k == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1) as f64;
    (mean, (var / k as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub key: CellKey,
    pub records: Vec<ReplicateRecord>,
    pub aggregate: Aggregate,
}

impl SweepConfig {
    /// Every cell of the grid in canonical order.
    pub fn cells(&self) -> Vec<CellKey> {
        let mut cells = Vec::new();
        for &estimator in &self.estimators {
            for &shape in &self.shapes {
                for &rank in &self.ranks {
                    for &gamma in &self.gammas {
                        for &n in &self.n_values {
                            cells.push(CellKey {
                                estimator,
                                shape,
                                rank,
                                gamma,
                                n,
                            });
                        }
                    }
                }
            }
        }
        cells.sort_by(|a, b| a.canonical_cmp(b));
        cells.dedup_by(|a, b| a.canonical_cmp(b) == Ordering::Equal);
        cells
    }

    fn solver_for(&self, key: &CellKey) -> SolverConfig {
        self.solver_defaults.for_cell(key.gamma, key.rank)
    }
}

struct Draw {
    truth: TruthMatrix,
    samples: SampleSet,
    seed: u64,
}

fn draw(key: &CellKey, config: &SweepConfig, t: usize) -> Result<Draw> {
    let seed = key.replicate_seed(config.base_seed, t);
    let truth_seed = match config.truth_mode {
        TruthMode::Fresh => derive_seed(&[seed, 0]),
        TruthMode::Fixed => key.fixed_truth_seed(config.base_seed),
    };
    let truth = generate_truth(key.shape, key.rank, key.gamma, config.generator, truth_seed)?;
    let samples = sample_observations(
        &truth,
        key.n,
        config.sampling_scheme,
        derive_seed(&[seed, 1]),
    )?;
    Ok(Draw {
        truth,
        samples,
        seed,
    })
}

/// The frozen penalty of a cell; zero for the constrained estimators.
pub fn cell_lambda(key: &CellKey, config: &SweepConfig) -> Result<f64> {
    if key.estimator != Estimator::NuclearPenalized {
        return Ok(0.0);
    }
    let d = draw(key, config, 0)?;
    let scale = (key.shape.dim_sum() as f64 / key.n as f64).sqrt();
    let grid: Vec<f64> = config.lambda_grid.iter().map(|m| m * scale).collect();
    let mut solver = config.solver_for(key);
    solver.seed = derive_seed(&[d.seed, 2]);
    let lambda = select_lambda(&d.samples, &solver, &grid)?;
    log::debug!("{key}: selected lambda {lambda}");
    Ok(lambda)
}

fn run_replicate(
    key: &CellKey,
    config: &SweepConfig,
    lambda: f64,
    t: usize,
) -> Result<ReplicateRecord> {
    let d = draw(key, config, t)?;
    let mut solver = config.solver_for(key);
    solver.lambda = lambda;
    solver.seed = derive_seed(&[d.seed, 2]);
    let started = Instant::now();
    let fit = key.estimator.fit(&d.samples, &solver);
    let elapsed = started.elapsed().as_millis() as u64;
    let metrics = match fit {
        Ok(fit) => {
            let report = risk_report(&fit.estimate, &d.truth)?;
            Some(ReplicateMetrics {
                excess: report.excess,
                risk: report.risk,
                bayes_risk: report.bayes_risk,
                frob_error_sq_normalized: report.frob_error_sq_normalized,
                iterations: fit.iterations,
                converged: fit.converged,
                runtime_ms: if config.record_timings { elapsed } else { 0 },
            })
        }
        Err(e) if e.is_numerical() => {
            log::warn!("{key} replicate {t}: {e}");
            None
        }
        Err(e) => return Err(e.into()),
    };
    Ok(ReplicateRecord {
        replicate: t,
        seed: d.seed,
        margin_tau: d.truth.margin_tau,
        lambda_used: lambda,
        metrics,
    })
}

fn assemble(key: CellKey, records: Vec<ReplicateRecord>) -> CellResult {
    let aggregate = Aggregate::of(&records);
    CellResult {
        key,
        records,
        aggregate,
    }
}

fn check_failures(cell: &CellResult) -> Result<()> {
    let failed = cell.aggregate.total - cell.aggregate.succeeded;
    if failed as f64 > MAX_FAILED_FRACTION * cell.aggregate.total as f64 {
        return Err(Error::CellFailed {
            cell: cell.key.to_string(),
            failed,
            total: cell.aggregate.total,
        });
    }
    Ok(())
}

/// Runs every replicate of one cell on the current thread.
pub fn run_cell(key: &CellKey, config: &SweepConfig) -> Result<CellResult> {
    config.validate()?;
    let lambda = cell_lambda(key, config)?;
    let records = (0..config.replicates)
        .map(|t| run_replicate(key, config, lambda, t))
        .collect::<Result<Vec<_>>>()?;
    let cell = assemble(*key, records);
    check_failures(&cell)?;
    Ok(cell)
}

/// Runs the whole grid on `threads` workers (`0` picks the number of CPUs)
/// and writes the CSV to `path`.
///
/// The output file is created before any computation. Rows are written in
/// canonical cell order, replicates in order followed by the cell's aggregate
/// row, so the file does not depend on the thread count. Cells with too many
/// failed replicates are still written; the first of them is then returned
/// as an error.
pub fn run_sweep(config: &SweepConfig, path: &Path, threads: usize) -> Result<Vec<CellResult>> {
    config.validate()?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let cells = compute_sweep(config, threads)?;
    table::write_sweep(file, config, &cells).map_err(|e| Error::io(path, e))?;
    for cell in &cells {
        check_failures(cell)?;
    }
    Ok(cells)
}

/// Runs the whole grid without writing anything and without the failed-cell
/// check.
pub fn compute_sweep(config: &SweepConfig, threads: usize) -> Result<Vec<CellResult>> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let keys = config.cells();
    pool.install(|| {
        let lambdas = keys
            .par_iter()
            .map(|key| cell_lambda(key, config))
            .collect::<Result<Vec<f64>>>()?;
        let jobs: Vec<(usize, usize)> = (0..keys.len())
            .flat_map(|c| (0..config.replicates).map(move |t| (c, t)))
            .collect();
        let mut records = jobs
            .par_iter()
            .map(|&(c, t)| run_replicate(&keys[c], config, lambdas[c], t))
            .collect::<Result<Vec<_>>>()?
            .into_iter();
        let cells = keys
            .iter()
            .map(|key| {
                let recs: Vec<ReplicateRecord> = records.by_ref().take(config.replicates).collect();
                log::info!(
                    "{key}: mean excess {:.4e}, {} of {} replicates ok",
                    Aggregate::of(&recs).mean_excess,
                    recs.iter().filter(|r| r.metrics.is_some()).count(),
                    recs.len()
                );
                assemble(*key, recs)
            })
            .collect();
        Ok(cells)
    })
}
