//! Sparse functional principal component analysis by conditional
//! expectation.
//!
//! [`FpcaModel::fit`] runs the whole chain for one variable: smoothed
//! moments, quadrature eigendecomposition with FVE truncation, and PACE
//! scores for every subject.

mod eigen;
mod moments;
mod scores;

pub use eigen::{eigendecompose, eigendecompose_surface, select_k, EigenSystem};
pub use moments::{
    fit_mean, fit_moments, raw_covariances, residuals, BandwidthChoice,
    CvSettings, MomentBandwidths, MomentsConfig, SmoothedMoments,
};
pub use scores::{
    conditional_scores, dense_scores, outlier_flags, pace_scores, reconstruct, Direction,
    OutlierFlag, OutlierRule, PaceResult, RidgePolicy, ScoreFailure, SubjectScores, MAX_CONDITION,
};

use crate::datamodel::{SparseFunctionalSample, SubjectId};
use crate::error::{FdaError, Result};
use crate::kernelsmooth::Curve;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FpcaConfig {
    pub moments: MomentsConfig,
    pub fve_threshold: f64,
    pub max_k: usize,
    pub ridge: RidgePolicy,
}

impl Default for FpcaConfig {
    fn default() -> Self {
        FpcaConfig {
            moments: MomentsConfig::default(),
            fve_threshold: 0.95,
            max_k: 8,
            ridge: RidgePolicy::Auto,
        }
    }
}

/// A fitted FPCA model; serializes to a single JSON document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FpcaModel {
    pub variable: String,
    pub moments: SmoothedMoments,
    pub eigen: EigenSystem,
    pub scores: BTreeMap<SubjectId, SubjectScores>,
    pub failures: Vec<ScoreFailure>,
}

impl FpcaModel {
    pub fn fit(sample: &SparseFunctionalSample, config: &FpcaConfig) -> Result<Self> {
        let moments = fit_moments(sample, &config.moments)?;
        Self::from_moments(sample, moments, config)
    }

    /// Eigendecompose and score given already smoothed moments.
    pub fn from_moments(
        sample: &SparseFunctionalSample,
        moments: SmoothedMoments,
        config: &FpcaConfig,
    ) -> Result<Self> {
        let eigen = eigendecompose(&moments, config.fve_threshold, config.max_k)?;
        let pace = pace_scores(sample, &moments, &eigen, config.ridge);
        Ok(FpcaModel {
            variable: sample.variable.clone(),
            moments,
            eigen,
            scores: pace.subjects,
            failures: pace.failures,
        })
    }

    pub fn k(&self) -> usize {
        self.eigen.k
    }

    pub fn subject_scores(&self, id: &SubjectId) -> Result<&[f64]> {
        self.scores
            .get(id)
            .map(|s| s.scores.as_slice())
            .ok_or_else(|| FdaError::InvalidInput(format!("no scores for subject {id}")))
    }

    /// Column `k` (0-based) of the score matrix, in subject order.
    pub fn score_column(&self, k: usize) -> Vec<f64> {
        self.scores.values().map(|s| s.scores[k]).collect()
    }

    /// Scores divided by each column's sample standard deviation.
    pub fn normalized_scores(&self) -> BTreeMap<SubjectId, Vec<f64>> {
        let sds: Vec<f64> = (0..self.k())
            .map(|k| crate::numeric::variance(&self.score_column(k)).sqrt())
            .collect();
        self.scores
            .iter()
            .map(|(id, s)| {
                let z = s
                    .scores
                    .iter()
                    .zip(&sds)
                    .map(|(x, sd)| if *sd > 0.0 { x / sd } else { 0.0 })
                    .collect();
                (id.clone(), z)
            })
            .collect()
    }

    pub fn reconstruct_subject(&self, id: &SubjectId, eval_times: &[f64]) -> Result<Curve> {
        reconstruct(&self.moments, &self.eigen, self.subject_scores(id)?, eval_times)
    }

    pub fn outliers(&self, rule: &OutlierRule) -> Vec<OutlierFlag> {
        outlier_flags(&self.scores, &self.eigen.eigenvalues, rule)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(f), self)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// `subject_id,xi1,...,xiK` with raw scores.
    pub fn write_scores_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["subject_id".to_string()];
        header.extend((1..=self.k()).map(|k| format!("xi{k}")));
        wtr.write_record(&header)?;
        for (id, s) in &self.scores {
            let mut row = vec![id.0.clone()];
            row.extend(s.scores.iter().map(|v| v.to_string()));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// One row per (variable, component): eigenvalue and cumulative FVE.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FveRow {
    pub variable: String,
    pub component: usize,
    pub eigenvalue: f64,
    pub cumulative_fve: f64,
    pub retained: bool,
}

/// Table of cumulative FVE for the first `n_components` components of each
/// model, in the given order.
pub fn fve_table(models: &[&FpcaModel], n_components: usize) -> Vec<FveRow> {
    let mut rows = Vec::new();
    for m in models {
        let e = &m.eigen;
        for c in 0..n_components.min(e.positive_eigenvalues.len()) {
            rows.push(FveRow {
                variable: m.variable.clone(),
                component: c + 1,
                eigenvalue: e.positive_eigenvalues[c],
                cumulative_fve: e.fve[c],
                retained: c < e.k,
            });
        }
    }
    rows
}

pub fn write_fve_csv<W: Write>(rows: &[FveRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
pub(crate) mod tests_support {
    use super::*;
    use crate::kernelsmooth::{Sigma2Estimate, Surface};

    /// Zero mean and constant covariance `var` on `grid`.
    pub fn flat_moments(grid: &[f64], var: f64) -> SmoothedMoments {
        let zero = Curve {
            grid: grid.to_vec(),
            values: vec![0.0; grid.len()],
        };
        SmoothedMoments {
            variable: "X".into(),
            mean: zero.clone(),
            autocov: Surface::from_fn(grid, grid, |_, _| var),
            sigma2: 0.0,
            sigma2_detail: Sigma2Estimate {
                value: 0.0,
                raw: 0.0,
                clamped: false,
                variance_curve: zero.clone(),
                covariance_diagonal: zero,
            },
            bandwidths: MomentBandwidths {
                mean: 1.0,
                cov: 1.0,
                mean_cv: None,
                cov_cv: None,
            },
            fallbacks: vec![],
        }
    }
}
