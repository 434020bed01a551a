use thiserror::Error;

/// Errors raised by state construction, evolution and the inequality checks.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("not Hermitian: max |A - A^dagger| = {violation:e}")]
    NotHermitian { violation: f64 },

    #[error("not positive semidefinite: smallest eigenvalue {min_eigenvalue:e}")]
    NotPositive { min_eigenvalue: f64 },

    #[error("trace is not one: |Tr A - 1| = {violation:e}")]
    TraceNotOne { violation: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("covariance is not symmetric positive definite: {0}")]
    CovarianceNotSpd(String),

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid density: {0}")]
    InvalidDensity(String),

    #[error("unknown state family `{0}`")]
    UnknownFamily(String),

    #[error("invalid family parameters: {0}")]
    InvalidParameters(String),

    #[error("not a conditional probability table: {0}")]
    NotAProbabilityTable(String),

    #[error("incompatible grids: {0}")]
    IncompatibleGrids(String),

    #[error("invalid time schedule: {0}")]
    InvalidSchedule(String),

    #[error("schedule too coarse: {0}")]
    ScheduleTooCoarse(String),

    #[error("grid budget exceeded: {0}")]
    GridBudgetExceeded(String),

    #[error("X and Y are not conditionally independent given M: I(X:Y|M) = {cmi:e} > {tolerance:e}")]
    NotConditionallyIndependent { cmi: f64, tolerance: f64 },

    #[error("Fisher estimate inconclusive: {0}")]
    FisherInconclusive(String),

    #[error("invalid config at `{path}`: {reason}")]
    ConfigInvalid { path: String, reason: String },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::ConfigInvalid {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
