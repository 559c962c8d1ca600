use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Which grid a failing per-grid-point fit belonged to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridAxis {
    /// Quantile index `u` of a quantile-regression family.
    Quantile,
    /// Outcome threshold `y` of a distribution-regression family.
    Threshold,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed csv: {0}")]
    Csv(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("non-numeric value {value:?} in column `{column}` (row {row})")]
    NonNumeric { row: usize, column: String, value: String },
    #[error("no complete rows left after dropping rows with missing values")]
    EmptyTable,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dimension mismatch: expected {expected} columns, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("singular design: reciprocal condition estimate {rcond:.3e} below tolerance {tolerance:.0e}")]
    SingularDesign { rcond: f64, tolerance: f64 },
    #[error("{solver} did not converge after {iterations} iterations ({detail})")]
    NonConvergence {
        solver: &'static str,
        iterations: usize,
        detail: String,
    },
    #[error("censored quantile regression step {step} selected no usable observations at u = {u}")]
    EmptySelection { step: u8, u: f64 },
    #[error("fit failed at {axis:?} grid point {value}: {source}")]
    AtGridPoint {
        axis: GridAxis,
        value: f64,
        #[source]
        source: Box<Error>,
    },
    #[error("threshold {0} is not a point of the fitted outcome grid")]
    OffGrid(f64),
    #[error("group {0} has no observations")]
    EmptyGroup(u8),
    #[error("empty grid")]
    EmptyGrid,
    #[error("no quantile index inside the inference range [{first}, {last}]")]
    EmptyRange { first: f64, last: f64 },
    #[error("bootstrap replication {replication} failed after {attempts} attempts: {source}")]
    BootstrapFailed {
        replication: usize,
        attempts: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("worker pool: {0}")]
    WorkerPool(String),
}

impl Error {
    /// Name of the pipeline stage an error originates from.
    pub fn module(&self) -> &'static str {
        match self {
            Error::Io { .. }
            | Error::Csv(_)
            | Error::UnknownColumn(_)
            | Error::NonNumeric { .. }
            | Error::EmptyTable => "data",
            Error::SingularDesign { .. }
            | Error::NonConvergence { .. }
            | Error::EmptySelection { .. } => "regress",
            Error::AtGridPoint { .. } | Error::OffGrid(_) => "conddist",
            Error::EmptyGroup(_) | Error::EmptyGrid | Error::DimensionMismatch { .. } => "counterfactual",
            Error::EmptyRange { .. } | Error::BootstrapFailed { .. } | Error::WorkerPool(_) => "inference",
            Error::InvalidInput(_) => "input",
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
