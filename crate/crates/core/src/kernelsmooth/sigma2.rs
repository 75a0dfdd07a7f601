use super::local::{diagonal_local_quadratic, local_quadratic_1d, WeightedPoint, WeightedPoint2};
use super::types::{Curve, Surface};
use super::KernelSpec;
use crate::error::{FdaError, Result};
use serde::{Deserialize, Serialize};

/// How `C(t, t)` is obtained when subtracting it from the smoothed diagonal
/// variance.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagonalMethod {
    /// Fit linear along / quadratic across the diagonal to the off-diagonal
    /// raw covariances.
    #[default]
    Rotated,
    /// Read the diagonal of the local-linear covariance surface.
    Surface,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sigma2Estimate {
    /// Final estimate, floored at zero.
    pub value: f64,
    /// Estimate before flooring.
    pub raw: f64,
    pub clamped: bool,
    /// Smoothed diagonal variance `V(t) = C(t,t) + σ²`.
    pub variance_curve: Curve,
    /// The `C(t,t)` values that were subtracted.
    pub covariance_diagonal: Curve,
}

/// Measurement-error variance: the average of `V(t) − C(t,t)` over the
/// central half of the grid, where `V` is a local quadratic smooth of the
/// squared centered observations.
pub fn estimate_sigma2(
    diagonal_raw: &[WeightedPoint],
    offdiagonal_raw: &[WeightedPoint2],
    surface: &Surface,
    bandwidth: f64,
    method: DiagonalMethod,
    kernel: &KernelSpec,
) -> Result<Sigma2Estimate> {
    if diagonal_raw.is_empty() {
        return Err(FdaError::NoData("no diagonal raw variances".into()));
    }
    let grid = &surface.grid_s;
    let lo = grid[0];
    let hi = grid[grid.len() - 1];
    let (a, b) = (lo + 0.25 * (hi - lo), lo + 0.75 * (hi - lo));
    let mut middle: Vec<f64> = grid.iter().copied().filter(|&t| t >= a && t <= b).collect();
    if middle.is_empty() {
        middle.push(0.5 * (lo + hi));
    }

    let variance_curve = local_quadratic_1d(diagonal_raw, bandwidth, &middle, kernel)?.estimate;
    let covariance_diagonal = match method {
        DiagonalMethod::Rotated => {
            diagonal_local_quadratic(offdiagonal_raw, bandwidth, &middle, kernel)?.estimate
        }
        DiagonalMethod::Surface => {
            let vals = middle.iter().map(|&t| surface.eval(t, t)).collect();
            Curve::new(middle.clone(), vals)?
        }
    };
    let diffs: Vec<f64> = variance_curve
        .values
        .iter()
        .zip(&covariance_diagonal.values)
        .map(|(v, c)| v - c)
        .collect();
    let raw = crate::numeric::mean(&diffs);
    let clamped = raw < 0.0;
    if clamped {
        log::warn!("negative measurement-error variance estimate {raw:.4e} clamped to 0");
    }
    Ok(Sigma2Estimate {
        value: raw.max(0.0),
        raw,
        clamped,
        variance_curve,
        covariance_diagonal,
    })
}
