use super::eigen::EigenSystem;
use super::moments::SmoothedMoments;
use crate::datamodel::{SparseFunctionalSample, SubjectId};
use crate::error::{FdaError, Result};
use crate::kernelsmooth::Curve;
use crate::numeric::trapezoid;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Condition number above which a subject's observation covariance is
/// considered unusable.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RidgePolicy {
    /// Add `1e-8 · trace(Σ_i) / N_i` to the diagonal when σ² is zero.
    #[default]
    Auto,
    Off,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubjectScores {
    pub scores: Vec<f64>,
    /// Conditional covariance `Λ − ΛΦᵀΣ⁻¹ΦΛ` of the scores.
    pub covariance: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreFailure {
    pub subject: SubjectId,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PaceResult {
    pub subjects: BTreeMap<SubjectId, SubjectScores>,
    pub failures: Vec<ScoreFailure>,
}

/// Gaussian conditional expectation of the scores given one subject's
/// centered observations.
///
/// `sigma` is the observation covariance (already including noise), `phi`
/// holds `φ_k(T_ij)` as `K` rows of length `N_i`.
pub fn conditional_scores(
    sigma: DMatrix<f64>,
    phi: &[Vec<f64>],
    lambdas: &[f64],
    resid: &[f64],
) -> std::result::Result<SubjectScores, String> {
    let n = resid.len();
    let k = lambdas.len();
    let eig = SymmetricEigen::new(sigma);
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for &e in eig.eigenvalues.iter() {
        lo = lo.min(e);
        hi = hi.max(e.abs());
    }
    if !(lo > 0.0) || hi / lo > MAX_CONDITION {
        return Err(format!(
            "observation covariance is not positive definite or too ill-conditioned (eigenvalues in [{lo:.3e}, {hi:.3e}])"
        ));
    }
    let v = &eig.eigenvectors;
    // Σ⁻¹ = V diag(1/e) Vᵀ applied to the residual and to each φ row
    let apply_inv = |x: &DVector<f64>| -> DVector<f64> {
        let mut proj = v.transpose() * x;
        for i in 0..n {
            proj[i] /= eig.eigenvalues[i];
        }
        v * proj
    };
    let r = DVector::from_column_slice(resid);
    let sinv_r = apply_inv(&r);
    let sinv_phi: Vec<DVector<f64>> = phi
        .iter()
        .map(|row| apply_inv(&DVector::from_column_slice(row)))
        .collect();
    let scores = (0..k)
        .map(|a| lambdas[a] * phi[a].iter().zip(sinv_r.iter()).map(|(p, s)| p * s).sum::<f64>())
        .collect();
    let covariance = (0..k)
        .map(|a| {
            (0..k)
                .map(|b| {
                    let q: f64 = phi[a].iter().zip(sinv_phi[b].iter()).map(|(p, s)| p * s).sum();
                    let diag = if a == b { lambdas[a] } else { 0.0 };
                    diag - lambdas[a] * lambdas[b] * q
                })
                .collect()
        })
        .collect();
    Ok(SubjectScores { scores, covariance })
}

/// PACE scores: `ξ̂_ik = λ_k φ_k(T_i)ᵀ Σ_i⁻¹ (Y_i − μ(T_i))` with
/// `Σ_i = Ĉ(T_ij, T_il) + σ² I`. Subjects whose `Σ_i` cannot be inverted
/// reliably are listed in `failures`.
pub fn pace_scores(
    sample: &SparseFunctionalSample,
    moments: &SmoothedMoments,
    eigen: &EigenSystem,
    ridge: RidgePolicy,
) -> PaceResult {
    let entries: Vec<(&SubjectId, &Vec<crate::datamodel::Observation>)> = sample.subjects.iter().collect();
    let results: Vec<(SubjectId, std::result::Result<SubjectScores, String>)> = entries
        .par_iter()
        .map(|(id, obs)| {
            let times: Vec<f64> = obs.iter().map(|o| o.time).collect();
            let resid: Vec<f64> = obs.iter().map(|o| o.value - moments.mean.eval(o.time)).collect();
            let n = times.len();
            let mut sigma = DMatrix::from_fn(n, n, |j, l| moments.autocov.eval(times[j], times[l]));
            for j in 0..n {
                sigma[(j, j)] += moments.sigma2;
            }
            if moments.sigma2 == 0.0 && ridge == RidgePolicy::Auto {
                let eps = 1e-8 * sigma.trace() / n as f64;
                for j in 0..n {
                    sigma[(j, j)] += eps;
                }
            }
            let phi: Vec<Vec<f64>> = eigen
                .eigenfunctions
                .iter()
                .map(|f| times.iter().map(|&t| f.eval(t)).collect())
                .collect();
            ((*id).clone(), conditional_scores(sigma, &phi, &eigen.eigenvalues, &resid))
        })
        .collect();

    let mut out = PaceResult::default();
    for (id, r) in results {
        match r {
            Ok(s) => {
                out.subjects.insert(id, s);
            }
            Err(reason) => {
                log::warn!("score estimation failed for subject {id}: {reason}");
                out.failures.push(ScoreFailure { subject: id, reason });
            }
        }
    }
    out
}

/// Integral scores `∫ (X − μ) φ_k` of a trajectory observed on the model grid.
pub fn dense_scores(trajectory: &Curve, moments: &SmoothedMoments, eigen: &EigenSystem) -> Result<Vec<f64>> {
    let grid = moments.grid();
    if trajectory.grid.len() != grid.len()
        || trajectory.grid.iter().zip(grid).any(|(a, b)| (a - b).abs() > 1e-12 * (1.0 + b.abs()))
    {
        return Err(FdaError::ResampleRequired);
    }
    let centered: Vec<f64> = trajectory
        .values
        .iter()
        .zip(&moments.mean.values)
        .map(|(x, m)| x - m)
        .collect();
    Ok(eigen
        .eigenfunctions
        .iter()
        .map(|phi| {
            let prod: Vec<f64> = centered.iter().zip(&phi.values).map(|(c, p)| c * p).collect();
            trapezoid(grid, &prod)
        })
        .collect())
}

/// `μ(t) + Σ_k ξ_k φ_k(t)` at the requested times, which must lie inside the
/// model grid.
pub fn reconstruct(
    moments: &SmoothedMoments,
    eigen: &EigenSystem,
    scores: &[f64],
    eval_times: &[f64],
) -> Result<Curve> {
    let g = moments.grid();
    let (lo, hi) = (g[0], g[g.len() - 1]);
    let tol = 1e-9 * (hi - lo);
    if let Some(&t) = eval_times.iter().find(|&&t| !(t >= lo - tol && t <= hi + tol)) {
        return Err(FdaError::Extrapolation { t, lo, hi });
    }
    if scores.len() > eigen.k {
        return Err(FdaError::InvalidInput(format!(
            "{} scores given for a model with {} components",
            scores.len(),
            eigen.k
        )));
    }
    let values = eval_times
        .iter()
        .map(|&t| {
            moments.mean.eval(t)
                + scores
                    .iter()
                    .zip(&eigen.eigenfunctions)
                    .map(|(xi, phi)| xi * phi.eval(t))
                    .sum::<f64>()
        })
        .collect();
    Curve::new(eval_times.to_vec(), values)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Low,
    High,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutlierFlag {
    pub subject: SubjectId,
    /// 1-based component index.
    pub component: usize,
    pub z: f64,
    pub direction: Direction,
    pub label: Option<String>,
}

/// Flags subjects whose standardized score `ξ̂_k / √λ_k` exceeds the
/// threshold in absolute value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutlierRule {
    pub threshold: f64,
}

impl Default for OutlierRule {
    fn default() -> Self {
        OutlierRule { threshold: 2.5 }
    }
}

fn growth_label(component: usize, direction: Direction) -> Option<String> {
    match (component, direction) {
        (1, Direction::Low) => Some("stunting-like".into()),
        (2, Direction::Low) => Some("faltering-like".into()),
        _ => None,
    }
}

pub fn outlier_flags(
    scores: &BTreeMap<SubjectId, SubjectScores>,
    eigenvalues: &[f64],
    rule: &OutlierRule,
) -> Vec<OutlierFlag> {
    let mut flags = Vec::new();
    for (id, s) in scores {
        for (k, (xi, lam)) in s.scores.iter().zip(eigenvalues).enumerate() {
            let z = xi / lam.sqrt();
            if z.abs() > rule.threshold {
                let direction = if z < 0.0 { Direction::Low } else { Direction::High };
                flags.push(OutlierFlag {
                    subject: id.clone(),
                    component: k + 1,
                    z,
                    direction,
                    label: growth_label(k + 1, direction),
                });
            }
        }
    }
    flags
}
