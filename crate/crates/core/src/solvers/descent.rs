//! Proximal gradient with backtracking, shared by the nuclear-norm solvers.
//!
//! The accelerated mode is the monotone variant of FISTA: the extrapolated
//! point only proposes a candidate, and a candidate that would raise the
//! objective restarts the momentum from the current iterate instead of being
//! taken. Either way the recorded objective never increases.

use alloc::vec;
use alloc::vec::Vec;

use super::{accept_step, dot, relative_change, SolverConfig};
use crate::error::{Error, Result};
use crate::model::Tally;
use crate::Matrix;

/// Inner accuracy of the proximal map relative to the last accepted move.
const PROX_ACCURACY: f64 = 1e-3;
/// Floor of the inner accuracy relative to the size of the prox center.
const PROX_FLOOR: f64 = 1e-12;

/// Output of a proximal map: the new point and its penalty value.
pub(crate) struct ProxPoint {
    pub point: Matrix,
    pub penalty: f64,
}

pub(crate) struct Outcome {
    pub x: Matrix,
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimizes `loss + penalty` from `start`, where `prox(center, step, tol)`
/// maps `center` to the penalized proximal point for step `step`, to within
/// `tol` in Frobenius norm.
///
/// The proximal map may be inexact: `tol` shrinks with the last accepted move,
/// down to a floor of `1e-12 (1 + ||center||)`. Descent is always checked on
/// the exact objective.
pub(crate) fn descend(
    tally: &Tally,
    config: &SolverConfig,
    start: Matrix,
    start_penalty: f64,
    mut prox: impl FnMut(&Matrix, f64, f64) -> Result<ProxPoint>,
) -> Result<Outcome> {
    let mut x = start;
    let mut loss = tally.loss(&x);
    let mut objective = loss + start_penalty;
    let mut trace = vec![objective];
    if !objective.is_finite() {
        return Err(Error::numerical(
            "non-finite objective at the starting point",
            trace,
        ));
    }

    let initial_step = config.step_init * tally.sample_count() as f64;
    let min_step = initial_step * 1e-14;
    let mut step = initial_step;
    let mut iterations = 0;
    let mut converged = false;
    // Extrapolated point; `None` means it coincides with `x`.
    let mut ahead: Option<(Matrix, f64)> = None;
    let mut momentum = 1.0;
    let mut last_move = f64::INFINITY;

    'outer: while iterations < config.max_iters {
        let (y, y_loss) = match &ahead {
            Some((y, l)) => (y, *l),
            None => (&x, loss),
        };
        let at_x = ahead.is_none();
        let step_before = step;
        let grad = tally.gradient(y);
        let accepted = loop {
            let z = y - &grad * step;
            let scale = if last_move.is_finite() {
                last_move
            } else {
                step * grad.norm()
            };
            let tol = (PROX_ACCURACY * scale).max(PROX_FLOOR * (1.0 + z.norm()));
            let p = prox(&z, step, tol)?;
            let cand_loss = tally.loss(&p.point);
            let cand_obj = cand_loss + p.penalty;
            if !cand_obj.is_finite() {
                return Err(Error::numerical("non-finite objective", trace));
            }
            let diff = &p.point - y;
            if accept_step(
                y_loss,
                cand_loss,
                dot(&grad, &diff),
                diff.norm_squared(),
                step,
            ) && (!at_x || cand_obj <= objective)
            {
                break Some((p.point, cand_loss, cand_obj));
            }
            step *= config.backtrack_factor;
            if step < min_step {
                break None;
            }
        };
        match accepted {
            Some((z, z_loss, z_obj)) if z_obj <= objective => {
                iterations += 1;
                let change = relative_change(objective, z_obj);
                last_move = (&z - &x).norm();
                if config.accelerated {
                    let next = 0.5 * (1.0 + libm::sqrt(1.0 + 4.0 * momentum * momentum));
                    let y_next = &z + (&z - &x) * ((momentum - 1.0) / next);
                    momentum = next;
                    let y_loss = tally.loss(&y_next);
                    ahead = Some((y_next, y_loss));
                }
                x = z;
                loss = z_loss;
                objective = z_obj;
                trace.push(objective);
                if change < config.rel_tol {
                    converged = true;
                    break 'outer;
                }
            }
            _ if !at_x => {
                // The extrapolation overshot: restart the momentum.
                ahead = None;
                momentum = 1.0;
                step = step_before;
            }
            _ => {
                // No representable decrease remains along the prox path.
                converged = true;
                break 'outer;
            }
        }
    }
    Ok(Outcome {
        x,
        trace,
        iterations,
        converged,
    })
}
