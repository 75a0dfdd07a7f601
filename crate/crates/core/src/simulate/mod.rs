//! Karhunen–Loève cohort generator and exact oracles.
//!
//! A [`Scenario`] describes the latent processes (mean, orthonormal basis,
//! eigenvalues), the visit design, optional derived variables and an
//! optional scalar block with an outcome model. [`simulate_cohort`] turns it
//! into a [`Cohort`](crate::datamodel::Cohort) plus the [`GroundTruth`].

mod basis;
mod generate;
mod scenario;

pub use basis::Basis;
pub use generate::{oracle_conditional_scores, simulate_cohort, subject_id, GroundTruth};
pub use scenario::{
    CategoricalCovariate, DerivedVariable, KlVariable, MeanFunction, NumericCovariate, OutcomeModel,
    ScalarScenario, Scenario, ScoreCorrelation, ScoreDistribution, ScoreEffect, VisitDesign,
};
