use thiserror::Error;

/// Errors raised by the model, estimation, and bound layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A caller-supplied argument violated a precondition.
    #[error("invalid input: {0}")]
    Input(String),

    /// Every hypothesis has zero joint weight for an observed output.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Monte Carlo statistics are mutually inconsistent (e.g. a log argument is not positive).
    #[error("invalid statistics: {0}")]
    InvalidStatistics(String),

    /// The bound is infinite for the supplied statistics.
    #[error("unbounded: {0}")]
    Unbounded(String),

    /// A channel sampler could not produce an output.
    #[error("sampler failure: {0}")]
    Sampler(String),

    /// Configuration could not be parsed or validated.
    #[error("configuration error at `{key}`: {message}")]
    Config { key: String, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn input(msg: impl Into<String>) -> Error {
    Error::Input(msg.into())
}
