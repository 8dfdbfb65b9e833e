//! Independent oracles shared by the integration and acceptance suites.
//!
//! Nothing here calls into the solver or spectral code paths it is used to
//! check: 2x2 norms are closed-form, the likelihood is recomputed from label
//! counts, and minimization is exhaustive coarse-to-fine grid search.
#![allow(dead_code)]

use std::f64::consts::PI;

/// Label counts on a 2x2 problem, indexed `[row][col]`.
#[derive(Debug, Clone, Copy)]
pub struct Counts2 {
    pub pos: [[f64; 2]; 2],
    pub neg: [[f64; 2]; 2],
    pub n: f64,
}

impl Counts2 {
    pub fn from_samples(obs: &[((usize, usize), i8)]) -> Self {
        let mut c = Counts2 {
            pos: [[0.0; 2]; 2],
            neg: [[0.0; 2]; 2],
            n: obs.len() as f64,
        };
        for &((i, j), y) in obs {
            if y > 0 {
                c.pos[i][j] += 1.0;
            } else {
                c.neg[i][j] += 1.0;
            }
        }
        c
    }

    /// Averaged negative log-likelihood, `x = [x11, x12, x21, x22]`.
    pub fn nll(&self, x: [f64; 4]) -> f64 {
        let mut total = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let v = x[2 * i + j];
                total += self.pos[i][j] * naive_log1pexp(-v) + self.neg[i][j] * naive_log1pexp(v);
            }
        }
        total / self.n
    }
}

fn naive_log1pexp(z: f64) -> f64 {
    // Written independently of the library's branch structure.
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Closed-form nuclear norm of `[[a, b], [c, d]]`: the larger of
/// `sqrt((a+d)^2 + (b-c)^2)` and `sqrt((a-d)^2 + (b+c)^2)`.
pub fn nuclear2(x: [f64; 4]) -> f64 {
    let [a, b, c, d] = x;
    let p = ((a + d).powi(2) + (b - c).powi(2)).sqrt();
    let q = ((a - d).powi(2) + (b + c).powi(2)).sqrt();
    p.max(q)
}

/// Whether `||X||_max <= t` for a 2x2 matrix.
///
/// `X / t` must be the cross-Gram block of unit vectors `u1, u2, v1, v2`.
/// Those four vectors form the cycle `u1-v1-u2-v2-u1` with angles
/// `acos(X_ij / t)`, and a partial correlation matrix on a cycle is
/// completable iff for every odd subset `S` of edges
/// `sum_S theta - sum_notS theta <= (|S| - 1) pi`.
pub fn maxnorm2_within(x: [f64; 4], t: f64) -> bool {
    let [a, b, c, d] = x;
    let cycle = [a / t, c / t, d / t, b / t]; // u1v1, v1u2, u2v2, v2u1
    if cycle.iter().any(|v| v.abs() > 1.0 + 1e-15) {
        return false;
    }
    let th: Vec<f64> = cycle.iter().map(|v| v.clamp(-1.0, 1.0).acos()).collect();
    let total: f64 = th.iter().sum();
    let slack = 1e-12;
    for e in 0..4 {
        // |S| = 1
        if th[e] - (total - th[e]) > slack {
            return false;
        }
        // |S| = 3 (all but e)
        if (total - th[e]) - th[e] > 2.0 * PI + slack {
            return false;
        }
    }
    true
}

/// `||X||_max` of a 2x2 matrix by bisection on [`maxnorm2_within`].
pub fn maxnorm2(x: [f64; 4]) -> f64 {
    let inf = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if inf == 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (inf, 2.0 * inf);
    while !maxnorm2_within(x, hi) {
        hi *= 2.0;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if maxnorm2_within(x, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Coarse-to-fine grid minimization over `[-gamma, gamma]^4`.
///
/// Starts from a 21-point-per-axis grid (spacing `gamma / 10`), then
/// repeatedly re-grids 21 points per axis around the incumbent at a quarter of
/// the previous spacing (a window of +-2.5 old cells) until the spacing is
/// below `1e-6`. Only points with `feasible(x)` are considered.
pub fn grid_minimize(
    gamma: f64,
    objective: impl Fn([f64; 4]) -> f64,
    feasible: impl Fn([f64; 4]) -> bool,
) -> (f64, [f64; 4]) {
    let mut h = gamma / 10.0;
    let mut center = [0.0; 4];
    let mut best = (f64::INFINITY, [0.0; 4]);
    let half_steps: i64 = 10;
    loop {
        let axis = |k: usize| -> Vec<f64> {
            (-half_steps..=half_steps)
                .map(|s| center[k] + s as f64 * h)
                .filter(|v| v.abs() <= gamma + 1e-12)
                .map(|v| v.clamp(-gamma, gamma))
                .collect()
        };
        let (a0, a1, a2, a3) = (axis(0), axis(1), axis(2), axis(3));
        for &x0 in &a0 {
            for &x1 in &a1 {
                for &x2 in &a2 {
                    for &x3 in &a3 {
                        let x = [x0, x1, x2, x3];
                        if !feasible(x) {
                            continue;
                        }
                        let v = objective(x);
                        if v < best.0 {
                            best = (v, x);
                        }
                    }
                }
            }
        }
        if h < 1e-6 {
            return best;
        }
        center = best.1;
        h /= 4.0;
    }
}

/// A random 2x2 instance: entries of the truth uniform on `[-2.5, 2.5]` and
/// `n` uniform observations with logistic labels.
pub fn random_obs2(seed: u64, n: usize) -> Vec<((usize, usize), i8)> {
    let mut g = obmc_core::rng::Philox::new(seed);
    let truth: Vec<f64> = (0..4).map(|_| 5.0 * g.next_f64() - 2.5).collect();
    (0..n)
        .map(|_| {
            let k = g.below(4) as usize;
            let p = 1.0 / (1.0 + (-truth[k]).exp());
            let y = if g.next_f64() < p { 1 } else { -1 };
            ((k / 2, k % 2), y)
        })
        .collect()
}

/// Averaged negative log-likelihood of a dense row-major matrix, summed
/// sample by sample.
pub fn naive_nll(x: &[f64], cols: usize, obs: &[((usize, usize), i8)]) -> f64 {
    let total: f64 = obs
        .iter()
        .map(|&((i, j), y)| naive_log1pexp(-(y as f64) * x[i * cols + j]))
        .sum();
    total / obs.len() as f64
}
