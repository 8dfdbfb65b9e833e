//! Bayes classifier and exact misclassification risk under uniformly drawn
//! entries.
//!
//! With `w` uniform over all `m1 m2` entries and `Y ~ f(X*_w)`, the risk of a
//! sign matrix `eta` is the average over entries of `1 - f(X*)` where `eta`
//! says `+1` and `f(X*)` where it says `-1`. Every quantity here is that
//! closed-form average; [`monte_carlo_risk`] exists only to cross-check it.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{sigmoid, Shape, TruthMatrix};
use crate::rng::Philox;
use crate::Matrix;

/// A matrix of `+1` / `-1` predictions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignMatrix {
    rows: usize,
    cols: usize,
    /// Column-major, like [`Matrix`].
    signs: Vec<i8>,
}

impl SignMatrix {
    pub fn from_matrix(x: &Matrix) -> Result<Self> {
        if x.iter().any(|&v| v != 1.0 && v != -1.0) {
            return Err(Error::invalid(
                "sign matrix entries must be exactly +1 or -1",
            ));
        }
        Ok(Self {
            rows: x.nrows(),
            cols: x.ncols(),
            signs: x.iter().map(|&v| v as i8).collect(),
        })
    }

    /// Independent fair signs.
    pub fn random(shape: Shape, rng: &mut Philox) -> Self {
        Self {
            rows: shape.rows(),
            cols: shape.cols(),
            signs: (0..shape.entry_count())
                .map(|_| if rng.sign() > 0.0 { 1 } else { -1 })
                .collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> i8 {
        self.signs[col * self.rows + row]
    }

    pub fn set(&mut self, row: usize, col: usize, sign: i8) {
        assert!(sign == 1 || sign == -1, "sign must be +1 or -1");
        self.signs[col * self.rows + row] = sign;
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_fn(self.rows, self.cols, |i, j| f64::from(self.get(i, j)))
    }

    /// Number of entries where the two sign matrices differ.
    pub fn disagreements(&self, other: &SignMatrix) -> usize {
        self.signs
            .iter()
            .zip(&other.signs)
            .filter(|(a, b)| a != b)
            .count()
    }

    fn check(&self, truth: &TruthMatrix) -> Result<()> {
        if (self.rows, self.cols) != truth.entries.shape() {
            return Err(Error::invalid(alloc::format!(
                "classifier is {}x{} but truth is {}x{}",
                self.rows,
                self.cols,
                truth.entries.nrows(),
                truth.entries.ncols()
            )));
        }
        Ok(())
    }
}

/// `+1` where `X >= 0` (equivalently `f(X) >= 1/2`), `-1` elsewhere.
pub fn bayes_classifier(x: &Matrix) -> Result<SignMatrix> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("classifier input has non-finite entries"));
    }
    Ok(SignMatrix {
        rows: x.nrows(),
        cols: x.ncols(),
        signs: x.iter().map(|&v| if v >= 0.0 { 1 } else { -1 }).collect(),
    })
}

/// Misclassification probability of `eta` for a fresh uniformly drawn entry.
pub fn exact_risk(eta: &SignMatrix, truth: &TruthMatrix) -> Result<f64> {
    eta.check(truth)?;
    let total: f64 = truth
        .entries
        .iter()
        .zip(&eta.signs)
        .map(|(&x, &s)| if s > 0 { sigmoid(-x) } else { sigmoid(x) })
        .sum();
    Ok(total / truth.entries.len() as f64)
}

/// Both algebraic forms of the excess risk: the difference of exact risks,
/// and the average of `|2 f(X*) - 1|` over entries where `eta` disagrees with
/// `sign(X*)`.
pub fn excess_risk_forms(eta: &SignMatrix, truth: &TruthMatrix) -> Result<(f64, f64)> {
    let bayes = bayes_classifier(&truth.entries)?;
    let difference = exact_risk(eta, truth)? - exact_risk(&bayes, truth)?;
    let mismatch: f64 = truth
        .entries
        .iter()
        .zip(eta.signs.iter().zip(&bayes.signs))
        .filter(|(_, (a, b))| a != b)
        .map(|(&x, _)| libm::tanh(0.5 * x.abs()))
        .sum();
    Ok((difference, mismatch / truth.entries.len() as f64))
}

/// Excess risk over the Bayes classifier `sign(X*)`, evaluated through the
/// mismatch form so the result is nonnegative by construction.
pub fn excess_risk(eta: &SignMatrix, truth: &TruthMatrix) -> Result<f64> {
    let (difference, mismatch) = excess_risk_forms(eta, truth)?;
    debug_assert!(
        (difference - mismatch).abs() <= 1e-10,
        "excess forms disagree"
    );
    Ok(mismatch)
}

/// Fraction of `trials` fresh draws `(w, Y)` with `Y != eta_w`. Entries come
/// from `Philox::stream(seed, 0)` and labels from `Philox::stream(seed, 1)`.
pub fn monte_carlo_risk(
    eta: &SignMatrix,
    truth: &TruthMatrix,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    eta.check(truth)?;
    if trials == 0 {
        return Err(Error::invalid("trials must be positive"));
    }
    let (m1, m2) = truth.entries.shape();
    let total = (m1 * m2) as u64;
    let mut pick = Philox::stream(seed, 0);
    let mut coin = Philox::stream(seed, 1);
    let mut errors = 0usize;
    for _ in 0..trials {
        let k = pick.below(total) as usize;
        let (i, j) = (k / m2, k % m2);
        let y: i8 = if coin.next_f64() < sigmoid(truth.entries[(i, j)]) {
            1
        } else {
            -1
        };
        if y != eta.get(i, j) {
            errors += 1;
        }
    }
    Ok(errors as f64 / trials as f64)
}

/// `(1 / (m1 m2)) ||Xhat - X*||_F^2`.
pub fn estimation_error(xhat: &Matrix, truth: &TruthMatrix) -> Result<f64> {
    truth.shape().check(xhat, "estimate")?;
    let total: f64 = xhat
        .iter()
        .zip(truth.entries.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(total / xhat.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskReport {
    pub risk: f64,
    pub bayes_risk: f64,
    pub excess: f64,
    pub frob_error_sq_normalized: f64,
}

/// Risk summary of the plug-in classifier `sign(Xhat)`.
pub fn risk_report(xhat: &Matrix, truth: &TruthMatrix) -> Result<RiskReport> {
    truth.shape().check(xhat, "estimate")?;
    let eta = bayes_classifier(xhat)?;
    let bayes = bayes_classifier(&truth.entries)?;
    Ok(RiskReport {
        risk: exact_risk(&eta, truth)?,
        bayes_risk: exact_risk(&bayes, truth)?,
        excess: excess_risk(&eta, truth)?,
        frob_error_sq_normalized: estimation_error(xhat, truth)?,
    })
}
