//! Log-log slope fits for scaling experiments.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Minimum number of points for a reported fit.
pub const MIN_FIT_POINTS: usize = 4;

/// Ordinary least squares fit of `ln y` against `ln x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points_used: usize,
}

/// Outcome of fitting a scan: a fit, or a residual series that is
/// identically zero (nothing to fit).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FitOutcome {
    Fitted(SlopeFit),
    Degenerate,
}

impl FitOutcome {
    pub fn slope(&self) -> Option<f64> {
        match self {
            FitOutcome::Fitted(f) => Some(f.slope),
            FitOutcome::Degenerate => None,
        }
    }
}

/// OLS line through `(x_i, y_i)`.
pub fn ols(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidArgument("x and y lengths differ".into()));
    }
    let m = xs.len();
    if m < 2 {
        return Err(Error::InvalidArgument("need at least two points".into()));
    }
    let mx = xs.iter().sum::<f64>() / m as f64;
    let my = ys.iter().sum::<f64>() / m as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("all x values coincide".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(SlopeFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
        points_used: m,
    })
}

/// Fits `ln |y|` against `ln x`. Needs at least [`MIN_FIT_POINTS`] points;
/// returns `Degenerate` when every `|y| <= zero_tol`.
pub fn fit_log_log(xs: &[f64], ys: &[f64], zero_tol: f64) -> Result<FitOutcome> {
    if xs.len() < MIN_FIT_POINTS {
        return Err(Error::InvalidArgument(format!(
            "slope fit needs at least {MIN_FIT_POINTS} points, got {}",
            xs.len()
        )));
    }
    if ys.iter().all(|y| y.abs() <= zero_tol) {
        return Ok(FitOutcome::Degenerate);
    }
    if xs.iter().any(|&x| x <= 0.0) || ys.iter().any(|&y| y == 0.0 || !y.is_finite()) {
        return Err(Error::InvalidArgument(
            "log-log fit needs positive x and nonzero finite y".into(),
        ));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.abs().ln()).collect();
    ols(&lx, &ly).map(FitOutcome::Fitted)
}
