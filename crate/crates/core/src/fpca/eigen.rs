use super::moments::SmoothedMoments;
use crate::error::{FdaError, Result};
use crate::kernelsmooth::{Curve, Surface};
use crate::numeric::{trapezoid, trapezoid_weights};
use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

/// Eigenvalues and grid-discretized eigenfunctions of a covariance surface.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenSystem {
    /// Retained eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    pub eigenfunctions: Vec<Curve>,
    pub k: usize,
    /// Cumulative fraction of variance explained by the first 1, 2, ...
    /// positive eigenvalues (all of them, not only the retained ones).
    pub fve: Vec<f64>,
    /// All positive eigenvalues, descending.
    pub positive_eigenvalues: Vec<f64>,
    /// Sum of the dropped negative eigenvalues (≤ 0).
    pub negative_mass: f64,
    /// `true` when the FVE threshold was not reached within `max_k`.
    pub capped: bool,
    pub fve_threshold: f64,
}

impl EigenSystem {
    pub fn grid(&self) -> &[f64] {
        &self.eigenfunctions[0].grid
    }

    /// Cumulative FVE of the retained components.
    pub fn retained_fve(&self) -> f64 {
        self.fve[self.k - 1]
    }

    /// Trapezoid Gram matrix of the retained eigenfunctions.
    pub fn gram(&self) -> Vec<Vec<f64>> {
        let g = self.grid();
        self.eigenfunctions
            .iter()
            .map(|a| {
                self.eigenfunctions
                    .iter()
                    .map(|b| {
                        let prod: Vec<f64> = a.values.iter().zip(&b.values).map(|(x, y)| x * y).collect();
                        trapezoid(g, &prod)
                    })
                    .collect()
            })
            .collect()
    }

    /// Largest absolute deviation of [`gram`](Self::gram) from identity.
    pub fn orthonormality_error(&self) -> f64 {
        let gram = self.gram();
        let mut worst = 0.0f64;
        for (i, row) in gram.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((v - target).abs());
            }
        }
        worst
    }

    /// `Σ_k λ_k φ_k(s) φ_k(t)` over the retained components.
    pub fn reconstructed_surface(&self) -> Surface {
        let g = self.grid().to_vec();
        let n = g.len();
        let mut values = vec![vec![0.0; n]; n];
        for (lam, phi) in self.eigenvalues.iter().zip(&self.eigenfunctions) {
            for i in 0..n {
                for j in 0..n {
                    values[i][j] += lam * phi.values[i] * phi.values[j];
                }
            }
        }
        Surface {
            grid_s: g.clone(),
            grid_t: g,
            values,
        }
    }

    /// Relative error of the truncated expansion in the quadrature-weighted
    /// Frobenius norm `‖W^{1/2} (C − C_K) W^{1/2}‖ / ‖W^{1/2} C W^{1/2}‖`.
    pub fn mercer_relative_error(&self, surface: &Surface) -> f64 {
        let w = trapezoid_weights(&surface.grid_s);
        let recon = self.reconstructed_surface();
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..w.len() {
            for j in 0..w.len() {
                let ww = w[i] * w[j];
                let c = surface.values[i][j];
                let d = c - recon.values[i][j];
                num += ww * d * d;
                den += ww * c * c;
            }
        }
        if den == 0.0 {
            0.0
        } else {
            (num / den).sqrt()
        }
    }
}

/// Flip `phi` so that its integral is nonnegative, or, when the integral is
/// negligible, so that it is positive at the left end of the grid.
fn canonical_sign(grid: &[f64], phi: &mut [f64]) {
    let integral = trapezoid(grid, phi);
    let flip = if integral.abs() < 1e-8 {
        phi[0] < 0.0
    } else {
        integral < 0.0
    };
    if flip {
        phi.iter_mut().for_each(|v| *v = -*v);
    }
}

/// Eigen-decompose a symmetric covariance surface under trapezoid
/// quadrature. `K` is the smallest count reaching `fve_threshold`, capped at
/// `max_k`.
pub fn eigendecompose_surface(surface: &Surface, fve_threshold: f64, max_k: usize) -> Result<EigenSystem> {
    if !surface.is_square() || surface.grid_s.len() < 3 {
        return Err(FdaError::InvalidInput(
            "eigendecomposition needs a square surface on at least 3 grid points".into(),
        ));
    }
    if !(fve_threshold > 0.0 && fve_threshold <= 1.0) {
        return Err(FdaError::Config(format!("FVE threshold must be in (0, 1], got {fve_threshold}")));
    }
    if max_k == 0 {
        return Err(FdaError::Config("max_k must be positive".into()));
    }
    let grid = &surface.grid_s;
    let n = grid.len();
    let sw: Vec<f64> = trapezoid_weights(grid).iter().map(|w| w.sqrt()).collect();
    let m = DMatrix::from_fn(n, n, |i, j| {
        sw[i] * 0.5 * (surface.values[i][j] + surface.values[j][i]) * sw[j]
    });
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let positive: Vec<usize> = order.iter().copied().filter(|&i| eig.eigenvalues[i] > 0.0).collect();
    if positive.is_empty() {
        return Err(FdaError::DegenerateCovariance);
    }
    let negative_mass: f64 = order
        .iter()
        .map(|&i| eig.eigenvalues[i])
        .filter(|&v| v <= 0.0)
        .sum();
    let positive_eigenvalues: Vec<f64> = positive.iter().map(|&i| eig.eigenvalues[i]).collect();
    let total: f64 = positive_eigenvalues.iter().sum();
    let mut acc = 0.0;
    let fve: Vec<f64> = positive_eigenvalues
        .iter()
        .map(|l| {
            acc += l;
            acc / total
        })
        .collect();
    let reached = fve.iter().position(|&f| f >= fve_threshold - 1e-12).map(|i| i + 1);
    let limit = max_k.min(positive.len());
    let (k, capped) = match reached {
        Some(k) if k <= limit => (k, false),
        _ => (limit, true),
    };
    if capped {
        log::warn!(
            "FVE threshold {fve_threshold} not reached with {limit} components (FVE {:.4}); K capped",
            fve[limit - 1]
        );
    }

    let eigenfunctions = positive[..k]
        .iter()
        .map(|&i| {
            let v = eig.eigenvectors.column(i);
            let mut phi: Vec<f64> = (0..n).map(|r| v[r] / sw[r].max(f64::MIN_POSITIVE)).collect();
            // unit norm under the same quadrature
            let norm2: f64 = trapezoid(grid, &phi.iter().map(|x| x * x).collect::<Vec<_>>());
            let s = norm2.sqrt();
            phi.iter_mut().for_each(|x| *x /= s);
            canonical_sign(grid, &mut phi);
            Curve {
                grid: grid.clone(),
                values: phi,
            }
        })
        .collect();

    Ok(EigenSystem {
        eigenvalues: positive_eigenvalues[..k].to_vec(),
        eigenfunctions,
        k,
        fve,
        positive_eigenvalues,
        negative_mass,
        capped,
        fve_threshold,
    })
}

pub fn eigendecompose(moments: &SmoothedMoments, fve_threshold: f64, max_k: usize) -> Result<EigenSystem> {
    eigendecompose_surface(&moments.autocov, fve_threshold, max_k)
}

/// Smallest `K` whose cumulative FVE reaches the threshold.
pub fn select_k(cumulative_fve: &[f64], threshold: f64) -> Option<usize> {
    cumulative_fve.iter().position(|&f| f >= threshold - 1e-12).map(|i| i + 1)
}
