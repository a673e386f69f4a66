use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid identifier: {0}")]
    InvalidIdentifier(String),

    #[error("invalid category `{0}`")]
    InvalidCategory(String),

    #[error("confidence {0} outside [0, 1]")]
    ConfidenceOutOfRange(f64),

    #[error("cannot merge records with different dedup keys ({left} vs {right})")]
    MergePrecondition { left: String, right: String },

    #[error("reference has neither a title nor a DOI")]
    UnresolvableReference,

    #[error("unknown action `{0}`")]
    UnknownAction(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("source `{key}`: cannot read {path}: {source}")]
    SourceUnreadable {
        key: String,
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("missing artifact {0}")]
    MissingArtifact(PathBuf),

    #[error("corrupt artifact {path}: {message}")]
    CorruptArtifact { path: PathBuf, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
