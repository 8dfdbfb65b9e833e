//! The three logistic estimators and penalty selection.
//!
//! Every solver minimizes the averaged negative log-likelihood (plus the
//! nuclear penalty for the penalized estimator) with backtracking, accepting
//! a step only when it satisfies the quadratic upper-bound test and does not
//! increase the objective. Objective traces are therefore nonincreasing, also
//! in the accelerated mode of the nuclear-norm solvers, which restarts its
//! momentum instead of taking an uphill step.

mod constrained;
mod descent;
mod maxnorm;
mod penalized;
mod select;

use alloc::vec::Vec;

pub use constrained::solve_nuclear_constrained;
pub use maxnorm::solve_maxnorm_constrained;
pub use penalized::{solve_nuclear_penalized, solve_nuclear_penalized_from};
pub use select::{select_lambda, select_lambda_scored, LambdaScore};

use crate::error::{Error, Result};
use crate::model::SampleSet;
use crate::spectral;
use crate::Matrix;

/// Tuning shared by all estimators. Fields a solver does not use are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Entrywise amplitude bound.
    pub gamma: f64,
    /// Rank used in the constraint radii.
    pub rank_hint: usize,
    /// Nuclear penalty weight (penalized solver).
    pub lambda: f64,
    pub max_iters: usize,
    /// Stop when the relative objective change drops below this.
    pub rel_tol: f64,
    /// Initial step per sample. The likelihood averages over `n` samples, so
    /// the first trial step is `step_init * n`.
    pub step_init: f64,
    pub backtrack_factor: f64,
    /// Factor width `k` of the max-norm solver.
    pub factor_width: usize,
    /// Random initializations tried by the max-norm solver.
    pub restarts: usize,
    pub seed: u64,
    /// Dykstra sweeps per proximal/projection step when the box constraint is
    /// active. `1` applies the spectral step and the clip once each.
    pub inner_sweeps: usize,
    /// Monotone accelerated steps for the nuclear-norm solvers; `false` gives
    /// plain proximal gradient.
    pub accelerated: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            rank_hint: 1,
            lambda: 0.0,
            max_iters: 2000,
            rel_tol: 1e-7,
            step_init: 4.0,
            backtrack_factor: 0.5,
            factor_width: 2,
            restarts: 5,
            seed: 0,
            inner_sweeps: 100,
            accelerated: true,
        }
    }
}

impl SolverConfig {
    /// Defaults with `gamma`, `rank_hint` and `factor_width = 2 * rank_hint` set.
    pub fn for_truth(gamma: f64, rank_hint: usize) -> Self {
        Self {
            gamma,
            rank_hint,
            factor_width: 2 * rank_hint,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(Error::invalid(msg)) };
        check(
            self.gamma > 0.0 && self.gamma.is_finite(),
            "gamma must be positive and finite",
        )?;
        check(self.rank_hint >= 1, "rank_hint must be at least 1")?;
        check(
            self.lambda >= 0.0 && self.lambda.is_finite(),
            "lambda must be nonnegative",
        )?;
        check(self.max_iters >= 1, "max_iters must be positive")?;
        check(self.rel_tol > 0.0, "rel_tol must be positive")?;
        check(
            self.step_init > 0.0 && self.step_init.is_finite(),
            "step_init must be positive",
        )?;
        check(
            self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0,
            "backtrack_factor must lie in (0, 1)",
        )?;
        check(
            self.factor_width >= self.rank_hint,
            "factor_width must be >= rank_hint",
        )?;
        check(self.restarts >= 1, "restarts must be positive")?;
        check(self.inner_sweeps >= 1, "inner_sweeps must be positive")
    }
}

/// How far the returned estimate is from the estimator's feasible set.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FeasibilityReport {
    /// Pre-clip `max(0, ||X||_inf - gamma)`.
    pub inf_norm_violation: f64,
    pub nuclear_norm: f64,
    /// `||U||_{2,inf} ||V||_{2,inf}` for a factorization of the estimate.
    pub maxnorm_upper_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub estimate: Matrix,
    /// Objective at the starting point followed by one value per iteration.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub feasibility_report: FeasibilityReport,
    /// Wall-clock time. The core has no clock and leaves this at zero; callers
    /// with one fill it in.
    pub runtime_ms: u64,
}

impl FitResult {
    pub fn final_objective(&self) -> f64 {
        self.objective_trace.last().copied().unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Estimator {
    NuclearPenalized,
    NuclearConstrained,
    MaxnormConstrained,
}

impl Estimator {
    pub const ALL: [Estimator; 3] = [
        Estimator::NuclearPenalized,
        Estimator::NuclearConstrained,
        Estimator::MaxnormConstrained,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Estimator::NuclearPenalized => "nuclear_penalized",
            Estimator::NuclearConstrained => "nuclear_constrained",
            Estimator::MaxnormConstrained => "maxnorm_constrained",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == name)
    }

    /// Stable numeric id used in seed derivation.
    pub fn id(&self) -> u64 {
        match self {
            Estimator::NuclearPenalized => 0,
            Estimator::NuclearConstrained => 1,
            Estimator::MaxnormConstrained => 2,
        }
    }

    pub fn fit(&self, samples: &SampleSet, config: &SolverConfig) -> Result<FitResult> {
        match self {
            Estimator::NuclearPenalized => solve_nuclear_penalized(samples, config),
            Estimator::NuclearConstrained => solve_nuclear_constrained(samples, config),
            Estimator::MaxnormConstrained => solve_maxnorm_constrained(samples, config),
        }
    }
}

/// Radius `gamma * sqrt(r m1 m2)` of the nuclear-norm constraint.
pub fn nuclear_radius(gamma: f64, rank: usize, m1: usize, m2: usize) -> f64 {
    gamma * libm::sqrt((rank * m1 * m2) as f64)
}

/// Bound `gamma * sqrt(r)` of the max-norm constraint.
pub fn maxnorm_radius(gamma: f64, rank: usize) -> f64 {
    gamma * libm::sqrt(rank as f64)
}

/// Nuclear norm and balanced-factorization max-norm bound of an estimate.
pub(crate) fn spectral_report(
    estimate: &Matrix,
    inf_norm_violation: f64,
) -> Result<FeasibilityReport> {
    let t = spectral::svd(estimate)?;
    let root: Vec<f64> = t.singular_values.iter().map(|s| libm::sqrt(*s)).collect();
    let u = Matrix::from_fn(t.left.nrows(), root.len(), |i, j| t.left[(i, j)] * root[j]);
    let v = Matrix::from_fn(t.right.nrows(), root.len(), |i, j| {
        t.right[(i, j)] * root[j]
    });
    Ok(FeasibilityReport {
        inf_norm_violation,
        nuclear_norm: t.nuclear_norm(),
        maxnorm_upper_bound: spectral::maxnorm_upper_bound(&u, &v),
    })
}

/// Whether a trial step passes the sufficient-decrease test
/// `f(x+) <= f(x) + <g, d> + ||d||^2 / (2t)` and does not raise the objective.
pub(crate) fn accept_step(f_old: f64, f_new: f64, inner: f64, dist_sq: f64, step: f64) -> bool {
    let model = f_old + inner + dist_sq / (2.0 * step);
    f_new.is_finite() && f_new <= model + 1e-14 * (1.0 + f_old.abs())
}

pub(crate) fn relative_change(old: f64, new: f64) -> f64 {
    (old - new).abs() / old.abs().max(f64::MIN_POSITIVE)
}

pub(crate) fn check_samples(samples: &SampleSet) -> Result<()> {
    if samples.is_empty() {
        Err(Error::invalid("no samples to fit"))
    } else {
        Ok(())
    }
}

/// Frobenius inner product.
pub(crate) fn dot(a: &Matrix, b: &Matrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}
