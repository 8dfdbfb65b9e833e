//! Dense spectral primitives: SVD with a fixed sign convention, singular
//! value thresholding, nuclear-ball projection, entrywise clipping and the
//! factor row-norm projection used by the max-norm solver.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::Matrix;

fn to_faer(x: &Matrix) -> faer::Mat<f64> {
    faer::Mat::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)])
}

/// Thin SVD `X = left * diag(singular_values) * right^T`.
///
/// Values are sorted nonincreasing and, for each pair of singular vectors,
/// the first left component with magnitude above `1e-12` is nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdTriple {
    pub left: Matrix,
    pub singular_values: Vec<f64>,
    pub right: Matrix,
}

impl SvdTriple {
    pub fn nuclear_norm(&self) -> f64 {
        self.singular_values.iter().sum()
    }

    /// `left * diag(values) * right^T`, skipping zero values.
    pub fn recompose_with(&self, values: &[f64]) -> Matrix {
        let keep: Vec<usize> = (0..values.len()).filter(|&i| values[i] != 0.0).collect();
        let (m1, m2) = (self.left.nrows(), self.right.nrows());
        if keep.is_empty() {
            return Matrix::zeros(m1, m2);
        }
        let scaled = Matrix::from_fn(m1, keep.len(), |i, j| {
            self.left[(i, keep[j])] * values[keep[j]]
        });
        let right = Matrix::from_fn(m2, keep.len(), |i, j| self.right[(i, keep[j])]);
        scaled * right.transpose()
    }

    pub fn recompose(&self) -> Matrix {
        self.recompose_with(&self.singular_values)
    }
}

fn ensure_finite(x: &Matrix, what: &str) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid(alloc::format!(
            "{what} has non-finite entries"
        )))
    }
}

pub fn svd(x: &Matrix) -> Result<SvdTriple> {
    ensure_finite(x, "svd input")?;
    let (m1, m2) = x.shape();
    let k = m1.min(m2);
    if k == 0 {
        return Err(Error::invalid("svd of an empty matrix"));
    }
    let raw = to_faer(x).thin_svd().map_err(|e| {
        Error::numerical(
            alloc::format!("svd of a {m1}x{m2} matrix failed: {e:?}"),
            Vec::new(),
        )
    })?;
    let (u, s, v) = (raw.U(), raw.S().column_vector(), raw.V());
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));

    let mut left = Matrix::zeros(m1, k);
    let mut right = Matrix::zeros(m2, k);
    let mut values = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        let flip = (0..m1)
            .map(|i| u[(i, src)])
            .find(|c| c.abs() > 1e-12)
            .is_some_and(|c| c < 0.0);
        let sign = if flip { -1.0 } else { 1.0 };
        for i in 0..m1 {
            left[(i, dst)] = sign * u[(i, src)];
        }
        for j in 0..m2 {
            right[(j, dst)] = sign * v[(j, src)];
        }
        values.push(s[src].max(0.0));
    }
    Ok(SvdTriple {
        left,
        singular_values: values,
        right,
    })
}

/// Singular values only, nonincreasing.
pub fn singular_values(x: &Matrix) -> Result<Vec<f64>> {
    ensure_finite(x, "matrix")?;
    let raw = to_faer(x).singular_values().map_err(|e| {
        Error::numerical(alloc::format!("singular values failed: {e:?}"), Vec::new())
    })?;
    let mut s: Vec<f64> = raw.into_iter().map(|v| v.max(0.0)).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

pub fn nuclear_norm(x: &Matrix) -> Result<f64> {
    Ok(singular_values(x)?.iter().sum())
}

pub fn operator_norm(x: &Matrix) -> Result<f64> {
    Ok(singular_values(x)?.first().copied().unwrap_or(0.0))
}

/// Proximal operator of `tau * ||.||_*`: soft-thresholds the singular values.
pub fn svt_prox(z: &Matrix, tau: f64) -> Result<Matrix> {
    Ok(svt_prox_with_norm(z, tau)?.0)
}

/// [`svt_prox`] together with the nuclear norm of the result.
pub fn svt_prox_with_norm(z: &Matrix, tau: f64) -> Result<(Matrix, f64)> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::invalid("threshold must be nonnegative and finite"));
    }
    let t = svd(z)?;
    let shrunk: Vec<f64> = t
        .singular_values
        .iter()
        .map(|s| (s - tau).max(0.0))
        .collect();
    let norm = shrunk.iter().sum();
    Ok((t.recompose_with(&shrunk), norm))
}

/// Euclidean projection of a nonincreasing, nonnegative vector onto
/// `{v >= 0, sum v = radius}` by sort-and-shift.
pub(crate) fn project_sorted_simplex(values: &[f64], radius: f64) -> Vec<f64> {
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (j, &s) in values.iter().enumerate() {
        cumulative += s;
        let candidate = (cumulative - radius) / (j + 1) as f64;
        if s - candidate > 0.0 {
            theta = candidate;
        }
    }
    values.iter().map(|s| (s - theta).max(0.0)).collect()
}

/// Projection onto `{X : ||X||_* <= radius}`.
pub fn project_nuclear_ball(z: &Matrix, radius: f64) -> Result<Matrix> {
    Ok(project_nuclear_ball_with_norm(z, radius)?.0)
}

/// [`project_nuclear_ball`] together with the nuclear norm of the result.
pub fn project_nuclear_ball_with_norm(z: &Matrix, radius: f64) -> Result<(Matrix, f64)> {
    if !(radius > 0.0) {
        return Err(Error::invalid("nuclear ball radius must be positive"));
    }
    let t = svd(z)?;
    let norm = t.nuclear_norm();
    if norm <= radius {
        return Ok((z.clone(), norm));
    }
    let projected = project_sorted_simplex(&t.singular_values, radius);
    let norm = projected.iter().sum();
    Ok((t.recompose_with(&projected), norm))
}

/// Result of [`clip_entries`].
#[derive(Debug, Clone, PartialEq)]
pub struct Clipped {
    pub matrix: Matrix,
    /// `max(0, ||Z||_inf - gamma)` measured before clipping.
    pub violation: f64,
}

/// Entrywise clamp to `[-gamma, gamma]`.
pub fn clip_entries(z: &Matrix, gamma: f64) -> Result<Clipped> {
    if !(gamma > 0.0) {
        return Err(Error::invalid("clip bound must be positive"));
    }
    let violation = (z.amax() - gamma).max(0.0);
    Ok(Clipped {
        matrix: z.map(|v| v.clamp(-gamma, gamma)),
        violation,
    })
}

/// Rescales every row whose Euclidean norm exceeds `bound` onto the sphere of
/// radius `bound`.
pub fn project_factor_rows(u: &Matrix, bound: f64) -> Result<Matrix> {
    let mut out = u.clone();
    project_factor_rows_in_place(&mut out, bound)?;
    Ok(out)
}

pub(crate) fn project_factor_rows_in_place(u: &mut Matrix, bound: f64) -> Result<()> {
    if !(bound > 0.0) {
        return Err(Error::invalid("row bound must be positive"));
    }
    for mut row in u.row_iter_mut() {
        let norm = row.norm();
        if norm > bound {
            row *= bound / norm;
        }
    }
    Ok(())
}

/// `||U||_{2,inf}`: largest row norm.
pub fn two_inf_norm(u: &Matrix) -> f64 {
    u.row_iter().fold(0.0, |m, row| f64::max(m, row.norm()))
}

/// Upper bound `||U||_{2,inf} ||V||_{2,inf}` on the max-norm of `U V^T`.
pub fn maxnorm_upper_bound(u: &Matrix, v: &Matrix) -> f64 {
    two_inf_norm(u) * two_inf_norm(v)
}

/// Outcome of a Dykstra splitting run.
#[derive(Debug, Clone)]
pub(crate) struct Split {
    pub matrix: Matrix,
    /// Nuclear norm of `matrix` when known without another factorization.
    pub nuclear_norm: Option<f64>,
    /// Final box multiplier, `None` when it is zero.
    pub box_dual: Option<Matrix>,
    #[allow(dead_code)]
    pub sweeps: usize,
}

/// Dykstra-type splitting for `argmin 1/2 ||X - Z||^2 + g(X) + box(X)`,
/// where `spectral` evaluates the prox of `g` (returning the nuclear norm of
/// its output) and the box is `[-gamma, gamma]`. Stops once the spectral and
/// box points, and successive box points, are within `tol` in Frobenius norm.
///
/// The iteration is proximal gradient ascent on the dual in the box
/// multiplier, accelerated with momentum and adaptive restart. It converges
/// from any starting multiplier; `warm` passes the one from a nearby problem. The returned iterate always satisfies the box exactly.
/// Without a warm start, when the first spectral step already lies in the box
/// it is the answer and is returned after one sweep.
pub(crate) fn dykstra_box(
    z: &Matrix,
    gamma: f64,
    max_sweeps: usize,
    tol: f64,
    warm: Option<&Matrix>,
    mut spectral: impl FnMut(&Matrix) -> Result<(Matrix, f64)>,
) -> Result<Split> {
    let mut v = match warm {
        Some(w) => w.clone(),
        None => Matrix::zeros(z.nrows(), z.ncols()),
    };
    let cold = warm.is_none();
    let mut x = z.clone();
    let mut v_prev = v.clone();
    let mut momentum = 1.0;
    let sweeps = max_sweeps.max(1);
    for sweep in 0..sweeps {
        let next_momentum = 0.5 * (1.0 + libm::sqrt(1.0 + 4.0 * momentum * momentum));
        let w = &v + (&v - &v_prev) * ((momentum - 1.0) / next_momentum);
        let (y, norm) = spectral(&(z - &w))?;
        let shifted = &y + &w;
        if cold && sweep == 0 && shifted.amax() <= gamma {
            return Ok(Split {
                matrix: y,
                nuclear_norm: Some(norm),
                box_dual: None,
                sweeps: 1,
            });
        }
        let next = shifted.map(|e| e.clamp(-gamma, gamma));
        let v_new = shifted - &next;
        // Restart the dual momentum when it points against the gradient step.
        let restart = (&w - &v_new).dot(&(&v_new - &v)) > 0.0;
        momentum = if restart { 1.0 } else { next_momentum };
        v_prev = core::mem::replace(&mut v, v_new);
        if restart {
            v_prev.copy_from(&v);
        }
        let gap = (&next - &y).norm();
        let moved = (&next - &x).norm();
        x = next;
        if gap <= tol && moved <= tol {
            return Ok(Split {
                matrix: x,
                nuclear_norm: None,
                box_dual: nonzero(v),
                sweeps: sweep + 1,
            });
        }
    }
    Ok(Split {
        matrix: x,
        nuclear_norm: None,
        box_dual: nonzero(v),
        sweeps,
    })
}

fn nonzero(m: Matrix) -> Option<Matrix> {
    if m.iter().any(|&e| e != 0.0) {
        Some(m)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Philox;

    fn random(m1: usize, m2: usize, seed: u64) -> Matrix {
        let mut g = Philox::new(seed);
        Matrix::from_fn(m1, m2, |_, _| g.normal())
    }

    fn diag(a: f64, b: f64) -> Matrix {
        Matrix::from_row_slice(2, 2, &[a, 0.0, 0.0, b])
    }

    #[test]
    fn svd_of_diagonal_and_zero() {
        assert_eq!(svd(&diag(1.0, 3.0)).unwrap().singular_values, [3.0, 1.0]);
        assert_eq!(
            svd(&Matrix::zeros(3, 2)).unwrap().singular_values,
            [0.0, 0.0]
        );
        let mut bad = Matrix::zeros(2, 2);
        bad[(0, 1)] = f64::NAN;
        assert!(svd(&bad).is_err());
    }

    #[test]
    fn svd_invariants() {
        for (m1, m2, seed) in [(7, 5, 1), (5, 7, 2), (6, 6, 3), (1, 4, 4)] {
            let x = random(m1, m2, seed);
            let t = svd(&x).unwrap();
            let k = m1.min(m2);
            assert_eq!(t.left.shape(), (m1, k));
            assert_eq!(t.right.shape(), (m2, k));
            assert!(t.singular_values.windows(2).all(|w| w[0] >= w[1]));
            let eye = Matrix::identity(k, k);
            assert!((t.left.transpose() * &t.left - &eye).norm() < 1e-8);
            assert!((t.right.transpose() * &t.right - &eye).norm() < 1e-8);
            assert!((t.recompose() - &x).norm() <= 1e-10 * x.norm());
            for j in 0..k {
                let first = t
                    .left
                    .column(j)
                    .iter()
                    .copied()
                    .find(|c| c.abs() > 1e-12)
                    .unwrap();
                assert!(first > 0.0);
            }
        }
    }

    #[test]
    fn svt_diagonal_cases() {
        let out = svt_prox(&diag(3.0, 1.0), 2.0).unwrap();
        assert!((out - diag(1.0, 0.0)).amax() < 1e-12);
        let z = random(4, 6, 8);
        assert!((svt_prox(&z, 0.0).unwrap() - &z).amax() < 1e-10);
        assert!(svt_prox(&z, -1.0).is_err());
    }

    #[test]
    fn nuclear_projection_cases() {
        let out = project_nuclear_ball(&diag(3.0, 1.0), 2.0).unwrap();
        assert!((out - diag(2.0, 0.0)).amax() < 1e-12);
        let inside = diag(0.75, 0.25);
        assert_eq!(project_nuclear_ball(&inside, 5.0).unwrap(), inside);
        assert!(project_nuclear_ball(&inside, 0.0).is_err());
    }

    #[test]
    fn simplex_shift() {
        assert_eq!(project_sorted_simplex(&[3.0, 1.0], 2.0), [2.0, 0.0]);
        let p = project_sorted_simplex(&[2.0, 1.5, 0.2], 3.0);
        assert!((p.iter().sum::<f64>() - 3.0).abs() < 1e-15);
        assert!((p[0] - 1.75).abs() < 1e-15 && (p[1] - 1.25).abs() < 1e-15 && p[2] == 0.0);
    }

    #[test]
    fn clip_cases() {
        let z = Matrix::from_row_slice(1, 1, &[5.0]);
        let c = clip_entries(&z, 2.0).unwrap();
        assert_eq!(c.matrix[(0, 0)], 2.0);
        assert_eq!(c.violation, 3.0);
        let small = Matrix::from_row_slice(1, 2, &[0.5, -1.0]);
        let c = clip_entries(&small, 1.0).unwrap();
        assert_eq!(c.matrix, small);
        assert_eq!(c.violation, 0.0);
        assert!(clip_entries(&small, 0.0).is_err());
    }

    #[test]
    fn factor_rows() {
        let u = Matrix::from_row_slice(2, 2, &[3.0, 4.0, 0.3, 0.4]);
        assert_eq!(project_factor_rows(&u, 5.0).unwrap(), u);
        let p = project_factor_rows(&u, 1.0).unwrap();
        assert!((p[(0, 0)] - 0.6).abs() < 1e-15 && (p[(0, 1)] - 0.8).abs() < 1e-15);
        assert_eq!(p[(1, 0)], 0.3);
        assert!(project_factor_rows(&u, -1.0).is_err());
        assert_eq!(two_inf_norm(&u), 5.0);
    }

    #[test]
    fn dykstra_with_inactive_box_is_one_sweep() {
        let z = diag(0.5, 0.2);
        let s = dykstra_box(&z, 1.0, 10, 1e-12, None, |m| svt_prox_with_norm(m, 0.1)).unwrap();
        assert_eq!(s.sweeps, 1);
        assert!((s.matrix - diag(0.4, 0.1)).amax() < 1e-14);
    }

    #[test]
    fn dykstra_warm_start_reaches_same_point() {
        let z = random(6, 5, 9) * 2.0;
        let cold = dykstra_box(&z, 1.0, 500, 1e-13, None, |m| svt_prox_with_norm(m, 0.5)).unwrap();
        let other = random(6, 5, 10);
        let warm = dykstra_box(&z, 1.0, 500, 1e-13, Some(&other), |m| {
            svt_prox_with_norm(m, 0.5)
        })
        .unwrap();
        assert!((cold.matrix - warm.matrix).amax() < 1e-9);
        let again = dykstra_box(&z, 1.0, 500, 1e-13, cold.box_dual.as_ref(), |m| {
            svt_prox_with_norm(m, 0.5)
        })
        .unwrap();
        assert!(again.sweeps <= 2);
    }

    #[test]
    fn dykstra_box_reaches_intersection_projection() {
        // Diagonal input: the problem separates and the exact answer is
        // clip(soft-threshold(z)) entry by entry.
        let z = diag(4.0, -0.5);
        let s = dykstra_box(&z, 2.0, 200, 1e-13, None, |m| svt_prox_with_norm(m, 1.0)).unwrap();
        assert!((s.matrix - diag(2.0, 0.0)).amax() < 1e-9);
    }
}
