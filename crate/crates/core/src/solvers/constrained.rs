use super::descent::{descend, ProxPoint};
use super::{check_samples, nuclear_radius, spectral_report, FitResult, SolverConfig};
use crate::error::Result;
use crate::model::SampleSet;
use crate::spectral::{self, dykstra_box};
use crate::Matrix;

/// Nuclear-norm constrained estimator: minimizes `nll(X)` over
/// `{||X||_inf <= gamma, ||X||_* <= gamma sqrt(r m1 m2)}` by projected
/// gradient with backtracking.
///
/// Each trial point is projected onto the nuclear ball and then the box; when
/// the box is active the two projections are alternated with Dykstra
/// corrections for up to `inner_sweeps` sweeps. The returned estimate is the
/// final iterate projected onto the ball once more, clipped, and shrunk back
/// into the ball if the clip pushed it out; the clip's pre-image violation and
/// the resulting nuclear norm are reported.
pub fn solve_nuclear_constrained(samples: &SampleSet, config: &SolverConfig) -> Result<FitResult> {
    config.validate()?;
    check_samples(samples)?;
    let shape = samples.shape();
    let tally = samples.tally();
    let gamma = config.gamma;
    let radius = nuclear_radius(gamma, config.rank_hint, shape.rows(), shape.cols());

    let mut box_dual: Option<Matrix> = None;
    let start = Matrix::zeros(shape.rows(), shape.cols());
    let outcome = descend(&tally, config, start, 0.0, |z, _, tol| {
        let split = dykstra_box(z, gamma, config.inner_sweeps, tol, box_dual.as_ref(), |m| {
            spectral::project_nuclear_ball_with_norm(m, radius)
        })?;
        box_dual = split.box_dual;
        Ok(ProxPoint {
            point: split.matrix,
            penalty: 0.0,
        })
    })?;
    let x = outcome.x;

    let (on_ball, _) = spectral::project_nuclear_ball_with_norm(&x, radius)?;
    let clipped = spectral::clip_entries(&on_ball, gamma)?;
    // Clipping can raise the nuclear norm; shrinking keeps the box.
    let mut estimate = clipped.matrix;
    let norm = spectral::nuclear_norm(&estimate)?;
    if norm > radius {
        estimate *= radius / norm;
    }
    let feasibility_report = spectral_report(&estimate, clipped.violation)?;
    Ok(FitResult {
        estimate,
        objective_trace: outcome.trace,
        iterations: outcome.iterations,
        converged: outcome.converged,
        feasibility_report,
        runtime_ms: 0,
    })
}
