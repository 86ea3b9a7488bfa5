//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration: shape mismatches, unknown names, bad fractions.
    #[error("config error: {0}")]
    Config(String),

    /// Non-finite value encountered where the contract requires finite ones.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// API misuse, e.g. backward before forward.
    #[error("usage error: {0}")]
    Usage(String),

    /// Malformed binary file; `offset` is the byte position of the problem.
    #[error("format error at byte {offset}: {what}")]
    Format { offset: u64, what: String },

    /// Snapshot applied to a model with a different architecture.
    #[error("fingerprint mismatch: snapshot {snapshot} vs model {model}")]
    FingerprintMismatch { snapshot: String, model: String },

    /// Pre-training did not clear the source-task accuracy gate.
    #[error("pre-training failed its accuracy gate: {accuracy} <= {gate}")]
    PretrainGate { accuracy: f32, gate: f32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }
}
