//! Small least-squares fits used by the extrapolations and rate checks.

use faer::prelude::*;
use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Least-squares coefficients for `design * c ≈ y`.
pub fn least_squares(design: &Mat<f64>, y: &[f64]) -> Result<Vec<f64>> {
    if design.nrows() != y.len() || design.nrows() < design.ncols() {
        return Err(Error::param("least squares needs at least as many samples as unknowns"));
    }
    let rhs = Mat::from_fn(y.len(), 1, |i, _| y[i]);
    let sol = design.col_piv_qr().solve_lstsq(&rhs);
    Ok((0..design.ncols()).map(|k| sol[(k, 0)]).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    /// Root-mean-square residual.
    pub rms: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    let design = Mat::from_fn(x.len(), 2, |i, j| if j == 0 { 1.0 } else { x[i] });
    let c = least_squares(&design, y)?;
    let rms = (x.iter().zip(y).map(|(&a, &b)| (c[0] + c[1] * a - b).powi(2)).sum::<f64>() / x.len() as f64).sqrt();
    Ok(LinearFit { intercept: c[0], slope: c[1], rms })
}

/// Slope of `ln|y|` against `ln x`.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.iter().chain(y).any(|&v| v == 0.0 || !v.is_finite()) || x.iter().any(|&v| v < 0.0) {
        return Err(Error::param("log-log fit needs positive x and non-zero finite y"));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.abs().ln()).collect();
    linear_fit(&lx, &ly)
}

/// Weights `α` with `Σ α_j F(e_j) ≈ F(0)` when `F` is fitted by the given
/// basis (first basis function must be the constant).
pub fn extrapolation_weights<B: Fn(f64) -> Vec<f64>>(points: &[f64], basis: B) -> Result<Vec<f64>> {
    let rows: Vec<Vec<f64>> = points.iter().map(|&e| basis(e)).collect();
    let p = rows[0].len();
    let design = Mat::from_fn(points.len(), p, |i, j| rows[i][j]);
    (0..points.len())
        .map(|k| {
            let unit: Vec<f64> = (0..points.len()).map(|i| if i == k { 1.0 } else { 0.0 }).collect();
            least_squares(&design, &unit).map(|c| c[0])
        })
        .collect()
}
