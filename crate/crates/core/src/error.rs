use std::io;

use thiserror::Error;

/// Errors surfaced by the model, simulator and experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid input: bad parameters, malformed config, empty tables.
    #[error("usage error: {0}")]
    Usage(String),

    /// A closed-form quantity diverges or is undefined at the given inputs.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("config parse error: {0}")]
    Config(#[from] toml::de::Error),

    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
