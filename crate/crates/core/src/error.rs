//! Crate-wide error type.
//!
//! Every fallible operation returns [`FdaError`]. Errors fall into four
//! classes (configuration, data/schema, numerical degeneracy, bootstrap
//! instability) which map onto the process exit codes used by the CLI.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, FdaError>;

/// Coarse classification used for exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numerical,
    Bootstrap,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Config => 2,
            ErrorClass::Data => 3,
            ErrorClass::Numerical => 4,
            ErrorClass::Bootstrap => 5,
        }
    }
}

#[derive(Debug, Error)]
pub enum FdaError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("schema error: missing required column `{0}`")]
    MissingColumn(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("duplicate records: {}", .0.join(", "))]
    DuplicateRecords(Vec<String>),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no data: {0}")]
    NoData(String),

    #[error("subject alignment error: {0}")]
    Alignment(String),

    #[error("evaluation time {t} lies outside the window [{lo}, {hi}]; extrapolation refused")]
    Extrapolation { t: f64, lo: f64, hi: f64 },

    #[error("trajectory grid does not match the model grid; resample required")]
    ResampleRequired,

    #[error("missing covariance component for pair ({0}, {1})")]
    Assembly(String, String),

    #[error("local rank deficiency: no usable points near evaluation point {at:?}")]
    LocalRank { at: Vec<f64> },

    #[error("no valid bandwidth: every candidate failed in cross-validation")]
    NoValidBandwidth,

    #[error("degenerate variance at t = {at}")]
    DegenerateVariance { at: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("insufficient off-diagonal pairs: every subject has a single observation")]
    InsufficientPairs,

    #[error("degenerate covariance: no positive eigenvalues")]
    DegenerateCovariance,

    #[error("rank-deficient design; collinear columns: {}", .0.join(", "))]
    RankDeficient(Vec<String>),

    #[error("bootstrap instability: {failed} of {total} replicates failed ({diagnostics})")]
    BootstrapInstability {
        failed: usize,
        total: usize,
        diagnostics: String,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl FdaError {
    pub fn class(&self) -> ErrorClass {
        use FdaError::*;
        match self {
            Config(_) => ErrorClass::Config,
            MissingColumn(_) | Schema(_) | DuplicateRecords(_) | InvalidInput(_) | NoData(_)
            | Alignment(_) | Extrapolation { .. } | ResampleRequired | Assembly(..) | Io(_)
            | Csv(_) | Json(_) => ErrorClass::Data,
            LocalRank { .. }
            | NoValidBandwidth
            | DegenerateVariance { .. }
            | Degenerate(_)
            | InsufficientPairs
            | DegenerateCovariance
            | RankDeficient(_) => ErrorClass::Numerical,
            BootstrapInstability { .. } => ErrorClass::Bootstrap,
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.class().exit_code()
    }
}
