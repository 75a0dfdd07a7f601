use crate::error::{FdaError, Result};
use crate::kernelsmooth::Curve;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Orthonormal function families on a window `[a, b]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// `1, √2 sin(2πu), √2 cos(2πu), √2 sin(4πu), …` (scaled by `1/√T`).
    Fourier,
    /// Half-range cosines `1, √2 cos(πu), √2 cos(2πu), …`.
    Cosine,
    /// Shifted Legendre polynomials.
    Legendre,
}

fn legendre(k: usize, x: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, x);
    match k {
        0 => p0,
        1 => p1,
        _ => {
            for n in 1..k {
                let nf = n as f64;
                let p2 = ((2.0 * nf + 1.0) * x * p1 - nf * p0) / (nf + 1.0);
                p0 = p1;
                p1 = p2;
            }
            p1
        }
    }
}

impl Basis {
    /// `φ_k(t)` for the 0-based index `k`.
    pub fn eval(&self, k: usize, t: f64, window: (f64, f64)) -> f64 {
        let (a, b) = window;
        let len = b - a;
        let u = (t - a) / len;
        let c = (2.0 / len).sqrt();
        match self {
            Basis::Fourier => {
                if k == 0 {
                    1.0 / len.sqrt()
                } else {
                    let m = ((k + 1) / 2) as f64;
                    if k % 2 == 1 {
                        c * (2.0 * PI * m * u).sin()
                    } else {
                        c * (2.0 * PI * m * u).cos()
                    }
                }
            }
            Basis::Cosine => {
                if k == 0 {
                    1.0 / len.sqrt()
                } else {
                    c * (k as f64 * PI * u).cos()
                }
            }
            Basis::Legendre => ((2 * k + 1) as f64 / len).sqrt() * legendre(k, 2.0 * u - 1.0),
        }
    }

    pub fn curve(&self, k: usize, grid: &[f64], window: (f64, f64)) -> Curve {
        Curve {
            grid: grid.to_vec(),
            values: grid.iter().map(|&t| self.eval(k, t, window)).collect(),
        }
    }

    /// Largest deviation of the Gram matrix of the first `k` functions from
    /// identity, by composite Simpson quadrature.
    pub fn orthonormality_error(&self, k: usize, window: (f64, f64)) -> f64 {
        let n = 4000;
        let (a, b) = window;
        let h = (b - a) / n as f64;
        let nodes: Vec<f64> = (0..=n).map(|i| a + h * i as f64).collect();
        let w: Vec<f64> = (0..=n)
            .map(|i| {
                let m = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                m * h / 3.0
            })
            .collect();
        let vals: Vec<Vec<f64>> = (0..k)
            .map(|j| nodes.iter().map(|&t| self.eval(j, t, window)).collect())
            .collect();
        let mut worst = 0.0f64;
        for i in 0..k {
            for j in 0..k {
                let g: f64 = (0..=n).map(|q| w[q] * vals[i][q] * vals[j][q]).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - target).abs());
            }
        }
        worst
    }

    pub fn check(&self, k: usize, window: (f64, f64)) -> Result<()> {
        let err = self.orthonormality_error(k, window);
        if err > 1e-8 {
            return Err(FdaError::Config(format!(
                "{self:?} basis is not orthonormal on the window to 1e-8 (error {err:.2e})"
            )));
        }
        Ok(())
    }
}
