use thiserror::Error;

/// Errors raised across the crate.
///
/// Every variant renders as a single line so that the CLI can forward it
/// verbatim as a machine-parsable reason.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SbeError {
    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("covariance is not positive semidefinite at probe time {time} (pivot {pivot:e})")]
    NotPositiveSemidefinite { time: f64, pivot: f64 },

    #[error("non-finite value at step {step} (t = {time})")]
    NonFinite { step: usize, time: f64 },

    #[error("empty interval: s = {s} is not below t = {t}")]
    EmptyInterval { s: f64, t: f64 },

    #[error("interval [{s}, {t}] outside path span [{a}, {b}]")]
    OutsideSpan { s: f64, t: f64, a: f64, b: f64 },

    #[error("coverage violation: {0}")]
    Coverage(String),

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("order {0} beyond supported range (max 32)")]
    OrderOutOfRange(usize),

    #[error("integer overflow computing c_{{{h},{k}}}")]
    CoefficientOverflow { h: usize, k: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("divergent integral: {0}")]
    Divergent(String),

    #[error("regularity budget violated: {0}")]
    Budget(String),

    #[error("sewing diverged: {0}")]
    SewingDivergence(String),

    #[error("no convergence after {iterations} Picard iterations (last change {last_change:e})")]
    NoConvergence { iterations: usize, last_change: f64 },

    #[error("format error: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for SbeError {
    fn from(e: std::io::Error) -> Self {
        SbeError::Io(e.to_string().replace('\n', " "))
    }
}

pub type Result<T> = std::result::Result<T, SbeError>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> SbeError {
    SbeError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
