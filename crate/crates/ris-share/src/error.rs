use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A scalar argument is outside its mathematical domain
    /// (non-positive distance, non-positive denominator, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Matrix or vector dimensions do not match.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A configuration value violates a documented constraint.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A numerical routine could not produce a trustworthy result.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// An operation would exceed its stated work budget.
    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error("failed to parse config: {0}")]
    Parse(#[from] serde_json::Error),

    /// Text input (CSV, command line) does not match the expected format.
    #[error("malformed input: {0}")]
    Malformed(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
