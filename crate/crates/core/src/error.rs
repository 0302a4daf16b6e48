//! Error taxonomy shared by every module.
//!
//! Variants map onto the CLI's exit-code contract: configuration problems,
//! malformed or inconsistent input data, and domain/runtime failures are
//! reported distinctly so callers can classify without string matching.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad configuration: unknown fields, out-of-range parameters, missing
    /// files named by a config, malformed JSON.
    #[error("config error: {0}")]
    Config(String),

    /// Malformed or internally inconsistent input data (CSV rows, taxonomy
    /// violations, duplicate records, uncovered table cells).
    #[error("data error: {0}")]
    Data(String),

    /// A precondition of an operation was violated or a computation has no
    /// defined result (zero arrest rate, un-clamped lambda, empty overlap).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Data(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}
