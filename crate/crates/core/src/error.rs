//! Error type shared across the crate.

/// Errors produced by configuration validation and numeric operations.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Invalid configuration value (odd head dimension, base <= 1, ...).
    #[error("invalid configuration: {0}")]
    Config(String),
    /// Input outside an operation's numeric domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// Mismatched vector lengths or bin counts.
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    /// Malformed plan file or incompatible plan contents.
    #[error("plan parse error: {0}")]
    PlanParse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
