//! Crate-wide error type.

use std::path::PathBuf;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("stale activation cache: network was mutated after the forward pass")]
    StaleCache,

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("benchmark generation failed for query {query_id}: {reason}")]
    BenchmarkGeneration { query_id: String, reason: String },

    #[error("malformed line {line} in {path}: {reason}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("duplicate id {id:?} in {path}")]
    DuplicateId { path: PathBuf, id: String },

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("attack precondition violated: {0}")]
    AttackPrecondition(String),

    #[error("no eligible positions remain")]
    NoEligiblePositions,

    #[error("generator transport error: {0}")]
    Transport(String),

    #[error("generator response validation failed: {0}")]
    Validation(String),

    #[error("schema version mismatch in {path}: expected {expected}, got {got}")]
    SchemaVersion {
        path: PathBuf,
        expected: u32,
        got: u32,
    },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error in {context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }

    /// True for errors caused by bad user input (config, flags, file schema)
    /// rather than a runtime failure. The CLI maps these to exit code 1.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::InvalidArgument(_)
                | Error::SchemaVersion { .. }
                | Error::MalformedLine { .. }
                | Error::DuplicateId { .. }
        )
    }
}
