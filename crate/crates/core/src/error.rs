use std::path::PathBuf;

use crate::modelio::ServiceError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Bad input data or configuration. Maps to exit code 1.
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("unknown chunk id `{0}`")]
    UnknownChunk(String),

    #[error("embedding failed for chunk `{chunk_id}`: {source}")]
    EmbedChunk {
        chunk_id: String,
        #[source]
        source: ServiceError,
    },

    #[error("question `{question_id}`: {source}")]
    Question {
        question_id: String,
        #[source]
        source: ServiceError,
    },

    /// A model service call failed. Maps to exit code 2.
    #[error(transparent)]
    Service(#[from] ServiceError),

    #[error("malformed payload: {reason}; raw payload: {raw}")]
    Payload { reason: String, raw: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {source}")]
    Record {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },

    #[error("bad index file: {0}")]
    IndexFormat(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True when the failure came from an external model service rather than
    /// from local validation.
    pub fn is_service(&self) -> bool {
        matches!(
            self,
            Error::Service(_) | Error::EmbedChunk { .. } | Error::Question { .. }
        )
    }
}
