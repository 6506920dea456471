use thiserror::Error;

/// Errors produced anywhere in the estimation pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// The rotation angle is too close to π for the logarithm (or the
    /// inverse left Jacobian) to be well defined.
    #[error("rotation angle {angle} is within the branch cut near pi")]
    AngleNearPi { angle: f64 },

    #[error("time step must be positive, got {0}")]
    InvalidDt(f64),

    #[error("Magnus order {0} is not supported here")]
    OrderUnsupported(u8),

    #[error("time {t} outside interval ({start}, {end}]")]
    TimeOutOfInterval { t: f64, start: f64, end: f64 },

    #[error("process-noise covariance is not positive definite")]
    NonPositiveDefiniteQ,

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(&'static str),

    #[error("singular system at block {block}")]
    SingularSystem { block: usize },

    #[error("did not converge after {iterations} iterations (last step {last_step:e})")]
    NotConverged { iterations: usize, last_step: f64 },

    #[error("timestamp mismatch at index {index}: {a} vs {b}")]
    TimestampMismatch { index: usize, a: f64, b: f64 },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
