//! Logistic 1-bit matrix completion.
//!
//! Binary labels are observed at randomly sampled entries of an unknown
//! low-rank matrix `X*`, each `+1` with probability `f(X*_w)` for the logistic
//! link `f`. This crate provides the observation model, three estimators of
//! `X*` (nuclear-norm penalized, nuclear-norm constrained and max-norm
//! constrained maximum likelihood), the dense spectral operators they rely on,
//! and the exact misclassification risk of the plug-in sign classifier.
//!
//! The crate is `no_std` and needs only `alloc`. All randomness flows from
//! explicit 64-bit seeds through [`rng::Philox`] streams and all transcendental
//! functions come from `libm`, so results are reproducible across platforms.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod error;
pub mod model;
pub mod rate;
pub mod risk;
pub mod rng;
pub mod solvers;
pub mod spectral;

/// Dense column-major real matrix used throughout the crate.
pub type Matrix = nalgebra::DMatrix<f64>;

pub use error::{Error, Result};
pub use model::{
    generate_truth, logistic_link, neg_log_likelihood, nll_gradient, sample_observations,
    Generator, SampleSet, SamplingScheme, Shape, TruthMatrix,
};
pub use rate::{fit_rate, RateFit};
pub use risk::{
    bayes_classifier, estimation_error, exact_risk, excess_risk, monte_carlo_risk, risk_report,
    RiskReport, SignMatrix,
};
pub use solvers::{
    select_lambda, solve_maxnorm_constrained, solve_nuclear_constrained, solve_nuclear_penalized,
    Estimator, FeasibilityReport, FitResult, SolverConfig,
};
pub use spectral::{
    clip_entries, project_factor_rows, project_nuclear_ball, svd, svt_prox, SvdTriple,
};
