use alloc::vec::Vec;

use super::{solve_nuclear_penalized_from, SolverConfig};
use crate::error::{Error, Result};
use crate::model::{neg_log_likelihood, SampleSet};
use crate::rng::Philox;
use crate::Matrix;

/// Stream tag for the train/hold-out permutation, split from `config.seed`.
pub const SPLIT_STREAM: u64 = 0x5e1ec7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaScore {
    pub lambda: f64,
    pub holdout_loss: f64,
}

/// Hold-out choice of the nuclear penalty.
///
/// The samples are permuted with `Philox::stream(config.seed, SPLIT_STREAM)`;
/// the first `floor(4n/5)` fit the penalized estimator for every `lambda` in
/// `grid` and the rest score it by averaged negative log-likelihood. The grid
/// is visited from the largest value down, each fit warm-started from the
/// previous one. The smallest hold-out loss wins; ties go to the larger
/// `lambda`, so the answer does not depend on the grid's order.
pub fn select_lambda(samples: &SampleSet, config: &SolverConfig, grid: &[f64]) -> Result<f64> {
    let scores = select_lambda_scored(samples, config, grid)?;
    let mut best = scores[0];
    for s in &scores[1..] {
        if s.holdout_loss < best.holdout_loss {
            best = *s;
        }
    }
    Ok(best.lambda)
}

/// Hold-out losses for each distinct grid value, largest `lambda` first.
pub fn select_lambda_scored(
    samples: &SampleSet,
    config: &SolverConfig,
    grid: &[f64],
) -> Result<Vec<LambdaScore>> {
    if grid.is_empty() {
        return Err(Error::invalid("lambda grid is empty"));
    }
    if grid.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
        return Err(Error::invalid(
            "lambda grid values must be positive and finite",
        ));
    }
    if samples.len() < 10 {
        return Err(Error::invalid(
            "lambda selection needs at least 10 observations",
        ));
    }
    let mut lambdas = grid.to_vec();
    lambdas.sort_by(|a, b| b.total_cmp(a));
    lambdas.dedup();
    if lambdas.len() == 1 {
        return Ok(alloc::vec![LambdaScore {
            lambda: lambdas[0],
            holdout_loss: f64::NAN,
        }]);
    }

    let mut order: Vec<usize> = (0..samples.len()).collect();
    Philox::stream(config.seed, SPLIT_STREAM).shuffle(&mut order);
    let cut = samples.len() * 4 / 5;
    let train = samples.subset(&order[..cut])?;
    let holdout = samples.subset(&order[cut..])?;

    let mut warm: Option<Matrix> = None;
    let mut scores = Vec::with_capacity(lambdas.len());
    for lambda in lambdas {
        let cfg = SolverConfig {
            lambda,
            ..config.clone()
        };
        let fit = solve_nuclear_penalized_from(&train, &cfg, warm.as_ref())?;
        let holdout_loss = neg_log_likelihood(&fit.estimate, &holdout)?;
        scores.push(LambdaScore {
            lambda,
            holdout_loss,
        });
        warm = Some(fit.estimate);
    }
    Ok(scores)
}
