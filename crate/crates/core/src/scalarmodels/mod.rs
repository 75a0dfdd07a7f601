//! Scalar-outcome models: random-intercept residualization against baseline
//! covariates, linear models on FPC scores with interactions, coefficient
//! bootstrap and score-outcome correlations.

mod design;
mod linear;
mod mixed;

pub use design::{check_rank, DesignMatrix, INTERCEPT};
pub use linear::{
    bootstrap_coefficients, bootstrap_score_lm, fit_score_lm, ols, pearson_scores_vs_outcome, score_design,
    write_kde_csv, CoefficientBootstrap, LinearFit, PearsonResult, ScoreColumn, COEFFICIENT_HEADER,
};
pub use mixed::{
    fit_residualization, fit_residualization_with, profiled_reml, ResidualizationFit, DEFAULT_SCAN_POINTS,
    LOG10_LAMBDA_RANGE,
};

use crate::datamodel::{ScalarCovariates, SubjectId};
use crate::error::{FdaError, Result};
use serde::{Deserialize, Serialize};

/// Which scalar fields enter the residualization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualizationSpec {
    pub outcome: String,
    #[serde(default)]
    pub numeric: Vec<String>,
    #[serde(default)]
    pub categorical: Vec<String>,
}

impl ResidualizationSpec {
    /// Every declared field except the outcome.
    pub fn all_fields(table: &ScalarCovariates, outcome: &str) -> Self {
        ResidualizationSpec {
            outcome: outcome.to_string(),
            numeric: table.schema.numeric.iter().filter(|n| *n != outcome).cloned().collect(),
            categorical: table.schema.categorical.iter().map(|c| c.name.clone()).collect(),
        }
    }
}

/// Residualize the outcome field of a covariate table over the subjects
/// that have every listed field and a cluster label (or `subjects`, when
/// given).
pub fn residualize_table(
    table: &ScalarCovariates,
    spec: &ResidualizationSpec,
    subjects: Option<&[SubjectId]>,
) -> Result<ResidualizationFit> {
    if table.schema.cluster.is_none() {
        return Err(FdaError::Schema("residualization needs a cluster column".into()));
    }
    let usable = |id: &SubjectId| {
        table.records.get(id).is_some_and(|r| {
            r.cluster.is_some()
                && r.numeric.contains_key(&spec.outcome)
                && spec.numeric.iter().all(|f| r.numeric.contains_key(f))
                && spec.categorical.iter().all(|f| r.categorical.contains_key(f))
        })
    };
    let rows: Vec<SubjectId> = match subjects {
        Some(s) => s.to_vec(),
        None => table.records.keys().filter(|id| usable(id)).cloned().collect(),
    };
    if rows.is_empty() {
        return Err(FdaError::NoData("no subject has a complete record".into()));
    }
    let design = DesignMatrix::from_covariates(table, &rows, &spec.numeric, &spec.categorical)?;
    let y = table.numeric_column(&spec.outcome, &rows)?;
    let clusters = table.cluster_labels(&rows)?;
    fit_residualization(&y, &design, &clusters)
}
