//! Error types shared across the crate.

use thiserror::Error;

/// Configuration and validation failures. Every variant names the offending
/// field so CLI diagnostics can point at it.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid value for `{field}`: {reason}")]
    Field { field: String, reason: String },
    #[error("unknown or malformed config file: {0}")]
    Parse(String),
    #[error("cannot read config `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl ConfigError {
    pub fn field(field: &str, reason: impl Into<String>) -> Self {
        ConfigError::Field {
            field: field.to_string(),
            reason: reason.into(),
        }
    }
}

/// Failures inside a running experiment. Shape mismatches between shards and
/// payloads indicate protocol bugs, not user error, and are reported as such.
#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("non-finite value produced: {0}")]
    NonFinite(String),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("io failure: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, RuntimeError>;
