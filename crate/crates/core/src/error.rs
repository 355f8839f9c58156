//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed serialized input. `byte_offset` points into the offending line.
    #[error("parse error at line {line}, byte offset {byte_offset}: {message}")]
    Parse {
        line: usize,
        byte_offset: usize,
        message: String,
    },

    /// A domain invariant was violated (span offsets, label probabilities, ...).
    #[error("invalid {field}: {message}")]
    Validation { field: String, message: String },

    /// A detection configuration field is out of contract.
    #[error("invalid config field {field}: {message}")]
    Config { field: String, message: String },

    /// Embedding provider failed while scoring; carries the window identity so
    /// the caller can retry or abort. Scores are never silently zeroed.
    #[error("scoring failed for {context}: {message}")]
    Scoring { context: String, message: String },

    /// Embedding endpoint failure (transport, auth, malformed response).
    #[error("embedding provider error: {0}")]
    Provider(String),

    /// Completion endpoint failure after the retry budget is spent.
    #[error("sampler error: {0}")]
    Sampler(String),

    /// A record has no resolvable sample set (offline file, inline, or cache).
    #[error("no samples available for record {0}")]
    MissingSamples(String),

    /// Prediction and gold files disagree on record identity.
    #[error("record id mismatch: {0}")]
    IdMismatch(String),

    /// A metric precondition failed (span outside the text, ...).
    #[error("metric error for record {record}: {message}")]
    Metric { record: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Process exit code for the CLI; distinct per failure class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } | Error::Validation { .. } | Error::Config { .. } => 2,
            Error::MissingSamples(_) => 3,
            Error::Scoring { .. } | Error::Provider(_) => 4,
            Error::Sampler(_) => 5,
            Error::IdMismatch(_) | Error::Metric { .. } => 6,
            Error::Io(_) => 1,
        }
    }
}
