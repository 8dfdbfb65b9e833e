use alloc::vec;
use alloc::vec::Vec;

use super::{
    check_samples, maxnorm_radius, relative_change, FeasibilityReport, FitResult, SolverConfig,
};
use crate::error::{Error, Result};
use crate::model::{SampleSet, Tally};
use crate::rng::Philox;
use crate::spectral;
use crate::Matrix;

/// Largest entry of the initial product. Beyond a few units the logistic
/// loss is saturated and its gradient vanishes.
const INIT_PEAK: f64 = 1.0;

/// Dense row-major `rows x width` factor.
#[derive(Debug, Clone)]
struct Factor {
    width: usize,
    data: Vec<f64>,
}

impl Factor {
    fn random(rows: usize, width: usize, rng: &mut Philox) -> Self {
        Self {
            width,
            data: (0..rows * width).map(|_| rng.normal()).collect(),
        }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    fn project_rows(&mut self, bound: f64) {
        for row in self.data.chunks_mut(self.width) {
            let norm = libm::sqrt(row.iter().map(|v| v * v).sum::<f64>());
            if norm > bound {
                let s = bound / norm;
                row.iter_mut().for_each(|v| *v *= s);
            }
        }
    }

    fn max_row_norm(&self) -> f64 {
        self.data
            .chunks(self.width)
            .map(|row| libm::sqrt(row.iter().map(|v| v * v).sum::<f64>()))
            .fold(0.0, f64::max)
    }

    fn to_matrix(&self) -> Matrix {
        let rows = self.data.len() / self.width;
        Matrix::from_row_slice(rows, self.width, &self.data)
    }
}

#[inline]
fn inner(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn loss_of(tally: &Tally, u: &Factor, v: &Factor) -> f64 {
    tally.loss_with(|c| inner(u.row(c.row), v.row(c.col)))
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Block {
    Left,
    Right,
}

struct Run {
    u: Factor,
    v: Factor,
    trace: Vec<f64>,
    iterations: usize,
    converged: bool,
}

/// One projected-gradient step on a single factor with backtracking.
/// Returns `false` when no acceptable step was found.
#[allow(clippy::too_many_arguments)]
fn block_step(
    tally: &Tally,
    u: &mut Factor,
    v: &mut Factor,
    block: Block,
    loss: &mut f64,
    step: &mut f64,
    config: &SolverConfig,
    bound: f64,
    initial_step: f64,
) -> bool {
    let (moving, fixed) = match block {
        Block::Left => (&*u, &*v),
        Block::Right => (&*v, &*u),
    };
    let mut grad = vec![0.0; moving.data.len()];
    let k = moving.width;
    for c in tally.cells() {
        let x = inner(u.row(c.row), v.row(c.col));
        let g = tally.cell_gradient(c, x);
        let (mi, fi) = match block {
            Block::Left => (c.row, c.col),
            Block::Right => (c.col, c.row),
        };
        let src = fixed.row(fi);
        for (dst, s) in grad[mi * k..(mi + 1) * k].iter_mut().zip(src) {
            *dst += g * s;
        }
    }

    *step = (*step / config.backtrack_factor).min(initial_step);
    let min_step = initial_step * 1e-14;
    loop {
        let mut cand = moving.clone();
        for (c, g) in cand.data.iter_mut().zip(&grad) {
            *c -= *step * g;
        }
        cand.project_rows(bound);
        let cand_loss = match block {
            Block::Left => loss_of(tally, &cand, v),
            Block::Right => loss_of(tally, u, &cand),
        };
        let (mut lin, mut dist) = (0.0, 0.0);
        for ((c, m), g) in cand.data.iter().zip(&moving.data).zip(&grad) {
            let d = c - m;
            lin += g * d;
            dist += d * d;
        }
        if super::accept_step(*loss, cand_loss, lin, dist, *step) && cand_loss <= *loss {
            *loss = cand_loss;
            match block {
                Block::Left => *u = cand,
                Block::Right => *v = cand,
            }
            return true;
        }
        *step *= config.backtrack_factor;
        if *step < min_step {
            return false;
        }
    }
}

fn run_from(
    tally: &Tally,
    mut u: Factor,
    mut v: Factor,
    config: &SolverConfig,
    bound: f64,
) -> Result<Run> {
    let mut loss = loss_of(tally, &u, &v);
    let mut trace = vec![loss];
    if !loss.is_finite() {
        return Err(Error::numerical(
            "non-finite objective at initialization",
            trace,
        ));
    }
    let initial_step = config.step_init * tally.sample_count() as f64;
    let (mut step_u, mut step_v) = (initial_step, initial_step);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iters {
        let before = loss;
        let moved_u = block_step(
            tally,
            &mut u,
            &mut v,
            Block::Left,
            &mut loss,
            &mut step_u,
            config,
            bound,
            initial_step,
        );
        let moved_v = block_step(
            tally,
            &mut u,
            &mut v,
            Block::Right,
            &mut loss,
            &mut step_v,
            config,
            bound,
            initial_step,
        );
        if !loss.is_finite() {
            return Err(Error::numerical("non-finite objective", trace));
        }
        iterations += 1;
        trace.push(loss);
        if (!moved_u && !moved_v) || relative_change(before, loss) < config.rel_tol {
            converged = true;
            break;
        }
    }
    Ok(Run {
        u,
        v,
        trace,
        iterations,
        converged,
    })
}

/// Max-norm constrained estimator in factored form `X = U V^T`.
///
/// Both factors have `factor_width` columns and every row is kept inside the
/// ball of radius `sqrt(gamma sqrt(r))`, which certifies
/// `||X||_max <= ||U||_{2,inf} ||V||_{2,inf} <= gamma sqrt(r)`. The factors are
/// updated alternately by projected gradient with backtracking. Restart `i`
/// draws Gaussian factors from `Philox::stream(seed, i)`, scaled so the
/// initial product has largest entry `min(gamma / 2, 1)`; the restart with
/// the lowest final objective wins. The estimate is `U V^T` clipped to `[-gamma, gamma]`.
pub fn solve_maxnorm_constrained(samples: &SampleSet, config: &SolverConfig) -> Result<FitResult> {
    config.validate()?;
    check_samples(samples)?;
    let shape = samples.shape();
    let tally = samples.tally();
    let gamma = config.gamma;
    let bound = libm::sqrt(maxnorm_radius(gamma, config.rank_hint));
    let k = config.factor_width;

    let mut best: Option<Run> = None;
    let mut last_error = None;
    for restart in 0..config.restarts {
        let mut rng = Philox::stream(config.seed, restart as u64);
        let mut u = Factor::random(shape.rows(), k, &mut rng);
        let mut v = Factor::random(shape.cols(), k, &mut rng);
        let peak = (0..shape.rows())
            .flat_map(|i| (0..shape.cols()).map(move |j| (i, j)))
            .map(|(i, j)| inner(u.row(i), v.row(j)).abs())
            .fold(0.0, f64::max);
        if peak > 0.0 {
            let s = libm::sqrt(INIT_PEAK.min(0.5 * gamma) / peak);
            u.data
                .iter_mut()
                .chain(v.data.iter_mut())
                .for_each(|x| *x *= s);
        }
        u.project_rows(bound);
        v.project_rows(bound);
        match run_from(&tally, u, v, config, bound) {
            Ok(run) => {
                let better = best
                    .as_ref()
                    .is_none_or(|b| run.trace.last() < b.trace.last());
                if better {
                    best = Some(run);
                }
            }
            Err(e) => last_error = Some(e),
        }
    }
    let Some(run) = best else {
        let trace = match last_error {
            Some(Error::Numerical { trace, .. }) => trace,
            _ => Vec::new(),
        };
        return Err(Error::numerical("every max-norm restart diverged", trace));
    };

    let product = run.u.to_matrix() * run.v.to_matrix().transpose();
    let clipped = spectral::clip_entries(&product, gamma)?;
    let feasibility_report = FeasibilityReport {
        inf_norm_violation: clipped.violation,
        nuclear_norm: spectral::nuclear_norm(&clipped.matrix)?,
        maxnorm_upper_bound: run.u.max_row_norm() * run.v.max_row_norm(),
    };
    Ok(FitResult {
        estimate: clipped.matrix,
        objective_trace: run.trace,
        iterations: run.iterations,
        converged: run.converged,
        feasibility_report,
        runtime_ms: 0,
    })
}
