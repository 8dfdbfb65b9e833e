//! Log-log power-law fits of error against sample size.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Least-squares line through `(log n, log y)` points.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// The `(log n, log y)` points the fit used.
    pub points: Vec<(f64, f64)>,
    /// Input points dropped because `y <= 0`.
    pub dropped: usize,
}

/// Fits `log y = intercept + slope * log n` by ordinary least squares.
///
/// Points with nonpositive `y` are dropped with a warning; fewer than three
/// surviving points is an error.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.iter().any(|&(n, _)| !(n > 0.0 && n.is_finite())) {
        return Err(Error::invalid("sample sizes must be positive and finite"));
    }
    let mut logged = Vec::with_capacity(points.len());
    let mut dropped = 0;
    for &(n, y) in points {
        if y > 0.0 && y.is_finite() {
            logged.push((libm::log(n), libm::log(y)));
        } else {
            log::warn!("dropping rate point n={n} with nonpositive value {y}");
            dropped += 1;
        }
    }
    if logged.len() < 3 {
        return Err(Error::invalid(alloc::format!(
            "rate fit needs at least 3 positive points, have {}",
            logged.len()
        )));
    }
    let (slope, intercept, r_squared) = least_squares(&logged)?;
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        points: logged,
        dropped,
    })
}

impl RateFit {
    /// Refits on the stored log-log points.
    pub fn refit(&self) -> Result<(f64, f64, f64)> {
        least_squares(&self.points)
    }
}

fn least_squares(points: &[(f64, f64)]) -> Result<(f64, f64, f64)> {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in points {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx <= 0.0 {
        return Err(Error::invalid(
            "rate fit needs at least two distinct sample sizes",
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = points
        .iter()
        .map(|&(x, y)| {
            let e = y - intercept - slope * x;
            e * e
        })
        .sum();
    let r_squared = if syy > 0.0 {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok((slope, intercept, r_squared))
}
