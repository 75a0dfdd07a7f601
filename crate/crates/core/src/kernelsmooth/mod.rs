//! Local polynomial kernel smoothing.
//!
//! The estimators here operate on pooled observations (1-D points for mean
//! and function-to-scalar covariance curves, 2-D points for raw covariance
//! surfaces). All smoothers use a Gaussian kernel truncated at a configurable
//! number of bandwidths, and fall back from local linear to a local constant
//! fit when the local design is degenerate; every fallback is recorded.

mod cv;
mod kde;
mod local;
mod sigma2;
mod types;

pub use cv::{cv_bandwidth_1d, cv_bandwidth_2d, cv_select, one_se_select, CvOutcome, SelectionRule};
pub use kde::{kde_1d, KdeBandwidth, KdeCurve};
pub use local::{
    diagonal_local_quadratic, local_bilinear_2d, local_bilinear_at, local_linear_1d,
    local_linear_at, local_quadratic_1d, FallbackRecord, FitMethod, Smoothed, WeightedPoint,
    WeightedPoint2,
};
pub use sigma2::{estimate_sigma2, DiagonalMethod, Sigma2Estimate};
pub use types::{BandwidthSpec, Curve, Surface};

use crate::error::{FdaError, Result};
use serde::{Deserialize, Serialize};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density `(2π)^{-1/2} exp(-u²/2)`.
#[inline]
pub fn gaussian_kernel(u: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * u * u).exp()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Gaussian,
}

/// Kernel plus the evaluation cutoff (in bandwidth units) beyond which
/// weights are treated as exactly zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub cutoff: f64,
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec {
            kind: KernelKind::Gaussian,
            cutoff: 5.0,
        }
    }
}

impl KernelSpec {
    pub fn gaussian(cutoff: f64) -> Result<Self> {
        if !(cutoff >= 4.0) || !cutoff.is_finite() {
            return Err(FdaError::InvalidInput(format!(
                "kernel cutoff must be a finite value >= 4, got {cutoff}"
            )));
        }
        Ok(KernelSpec {
            kind: KernelKind::Gaussian,
            cutoff,
        })
    }

    #[inline]
    pub fn weight(&self, u: f64) -> f64 {
        if u.abs() > self.cutoff {
            0.0
        } else {
            match self.kind {
                KernelKind::Gaussian => gaussian_kernel(u),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_analytic_values() {
        assert!((gaussian_kernel(0.0) - 0.398_942_280_4).abs() < 1e-9);
        assert!((gaussian_kernel(1.0) - 0.241_970_724_5).abs() < 1e-9);
        assert_eq!(gaussian_kernel(1.0), gaussian_kernel(-1.0));
        let k = KernelSpec::default();
        assert_eq!(k.weight(10.0), 0.0);
        assert!(k.weight(k.cutoff) < 1e-4);
    }

    #[test]
    fn kernel_strictly_decreasing_in_abs() {
        let mut prev = gaussian_kernel(0.0);
        for i in 1..100 {
            let v = gaussian_kernel(i as f64 * 0.05);
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn cutoff_below_four_rejected() {
        assert!(KernelSpec::gaussian(3.0).is_err());
        assert!(KernelSpec::gaussian(4.0).is_ok());
    }
}
