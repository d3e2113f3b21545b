use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("duplicate key `{0}`")]
    DuplicateKey(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("embedding provider at {endpoint} unavailable after {attempts} attempt(s): {reason}")]
    ProviderUnavailable {
        endpoint: String,
        attempts: u32,
        reason: String,
    },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("missing embedding for key `{0}`")]
    MissingEmbedding(String),

    #[error("invalid turn indices: l={l}, j1={j1}, j2={j2}, k={k}")]
    InvalidIndices { l: usize, j1: usize, j2: usize, k: usize },

    #[error("invalid edit sequence `{id}`: {reason}")]
    InvalidSequence { id: String, reason: String },

    #[error("value {value} outside [{lo}, {hi}]")]
    Range { value: f64, lo: f64, hi: f64 },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("invalid record: {0}")]
    InvalidRecord(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: line {line}: {source}", path.display())]
    Json {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
