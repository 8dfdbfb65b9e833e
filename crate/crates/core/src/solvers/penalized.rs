use super::descent::{descend, ProxPoint};
use super::{check_samples, spectral_report, FitResult, SolverConfig};
use crate::error::Result;
use crate::model::SampleSet;
use crate::spectral::{self, dykstra_box};
use crate::Matrix;

/// Nuclear-norm penalized estimator over the box `||X||_inf <= gamma`:
/// minimizes `nll(X) + lambda ||X||_*` by proximal gradient with
/// backtracking. The proximal step is singular value thresholding followed
/// by the box, combined by Dykstra splitting when the box is active.
pub fn solve_nuclear_penalized(samples: &SampleSet, config: &SolverConfig) -> Result<FitResult> {
    solve_nuclear_penalized_from(samples, config, None)
}

/// As [`solve_nuclear_penalized`], starting from `init` (clipped into the box)
/// instead of zero.
pub fn solve_nuclear_penalized_from(
    samples: &SampleSet,
    config: &SolverConfig,
    init: Option<&Matrix>,
) -> Result<FitResult> {
    config.validate()?;
    check_samples(samples)?;
    let shape = samples.shape();
    let tally = samples.tally();
    let gamma = config.gamma;
    let lambda = config.lambda;

    let (x, norm) = match init {
        Some(start) => {
            shape.check(start, "initial point")?;
            let clipped = start.map(|v| v.clamp(-gamma, gamma));
            let norm = spectral::nuclear_norm(&clipped)?;
            (clipped, norm)
        }
        None => (Matrix::zeros(shape.rows(), shape.cols()), 0.0),
    };
    // Box multiplier of the last prox; successive prox centers are close.
    let mut box_dual: Option<Matrix> = None;
    let outcome = descend(&tally, config, x, lambda * norm, |z, step, tol| {
        let threshold = step * lambda;
        let split = dykstra_box(z, gamma, config.inner_sweeps, tol, box_dual.as_ref(), |m| {
            spectral::svt_prox_with_norm(m, threshold)
        })?;
        box_dual = split.box_dual;
        let norm = match split.nuclear_norm {
            Some(n) => n,
            None => spectral::nuclear_norm(&split.matrix)?,
        };
        Ok(ProxPoint {
            point: split.matrix,
            penalty: lambda * norm,
        })
    })?;
    let x = outcome.x;

    let feasibility_report = spectral_report(&x, 0.0)?;
    Ok(FitResult {
        estimate: x,
        objective_trace: outcome.trace,
        iterations: outcome.iterations,
        converged: outcome.converged,
        feasibility_report,
        runtime_ms: 0,
    })
}
