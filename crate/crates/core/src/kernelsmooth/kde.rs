use super::gaussian_kernel;
use super::types::Curve;
use crate::error::{FdaError, Result};
use crate::numeric::{linspace, quantile_sorted, trapezoid, variance};
use serde::{Deserialize, Serialize};

const KDE_GRID: usize = 512;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KdeBandwidth {
    /// `0.9 · min(sd, IQR/1.34) · n^{-1/5}`
    #[default]
    Silverman,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KdeCurve {
    pub bandwidth: f64,
    pub density: Curve,
}

/// Gaussian kernel density estimate on a 512-point grid spanning
/// `[min − 3h, max + 3h]`, rescaled so that its trapezoid integral is one
/// (the mass beyond ±3h is otherwise cut off).
pub fn kde_1d(values: &[f64], rule: KdeBandwidth) -> Result<KdeCurve> {
    if values.len() < 2 || values.iter().any(|v| !v.is_finite()) {
        return Err(FdaError::InvalidInput("kde needs at least two finite values".into()));
    }
    let var = variance(values);
    if !(var > 0.0) {
        return Err(FdaError::Degenerate(
            "zero-variance input to kde; report a point mass instead".into(),
        ));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let h = match rule {
        KdeBandwidth::Fixed(h) if h > 0.0 => h,
        KdeBandwidth::Fixed(h) => {
            return Err(FdaError::InvalidInput(format!("kde bandwidth must be positive, got {h}")))
        }
        KdeBandwidth::Silverman => {
            let sd = var.sqrt();
            let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
            let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
            0.9 * spread * (values.len() as f64).powf(-0.2)
        }
    };
    let lo = sorted[0] - 3.0 * h;
    let hi = sorted[sorted.len() - 1] + 3.0 * h;
    let grid = linspace(lo, hi, KDE_GRID);
    let n = values.len() as f64;
    let mut dens: Vec<f64> = grid
        .iter()
        .map(|&x| values.iter().map(|&v| gaussian_kernel((x - v) / h)).sum::<f64>() / (n * h))
        .collect();
    let mass = trapezoid(&grid, &dens);
    for d in &mut dens {
        *d /= mass;
    }
    Ok(KdeCurve {
        bandwidth: h,
        density: Curve::new(grid, dens)?,
    })
}
