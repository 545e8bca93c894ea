use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A vector or matrix had a length inconsistent with the declared
    /// antenna count, or the antenna count itself is out of range.
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    /// A file could not be parsed; the message names the offending field.
    #[error("parse error: {0}")]
    Parse(String),

    /// An argument left the mathematical domain of an operation
    /// (e.g. a nonpositive SINR used as a linearization denominator).
    #[error("domain error: {0}")]
    Domain(String),

    /// A value violated a declared invariant (nonpositive variance, power
    /// budget, tolerance, ...).
    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        // serde's message already names the offending field
        // ("missing field `g2`", "unknown field `foo`", ...).
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
