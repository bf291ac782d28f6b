use alloc::string::String;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("numeric overflow: state exceeded the guard at sample {index}")]
    NumericOverflow { index: i64 },
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("structural condition violated: {0}")]
    Structural(String),
    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },
    #[error("invalid gain: {0}")]
    InvalidGain(String),
    #[error("ill-posed loop or controller: {0}")]
    IllPosed(String),
    #[error("threshold undefined: {0}")]
    ThresholdUndefined(String),
    #[error("inconsistent data: {0}")]
    Inconsistent(String),
    #[error("assumption violated: {0}")]
    AssumptionViolation(String),
    #[error("identification failed: {0}")]
    Identification(String),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! bail {
    ($variant:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::$variant(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;
