//! Sparse functional data analysis for longitudinal cohorts: smoothing of
//! irregular trajectories, functional principal components, cross
//! correlations, concurrent regression and score models for scalar outcomes.

pub mod bootstrap;
pub mod cli;
pub mod crosscorr;
pub mod datamodel;
pub mod error;
pub mod fcr;
pub mod fpca;
pub mod kernelsmooth;
pub mod numeric;
pub mod scalarmodels;
pub mod simulate;

pub use error::{FdaError, Result};
