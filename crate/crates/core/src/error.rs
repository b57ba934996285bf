use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the metric and model code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty corpus: cannot build a usable vocabulary")]
    EmptyCorpus,

    #[error("vocabulary too small: {found} non-reserved tokens, need at least {required}")]
    VocabularyTooSmall { found: usize, required: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch in {op}: expected {expected}, got {found}")]
    ShapeMismatch {
        op: &'static str,
        expected: String,
        found: String,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("idf undefined: corpus has {0} reference set(s), need at least 2")]
    IdfUndefined(usize),

    #[error("transport problem undefined: {0}")]
    UndefinedTransport(String),

    #[error("non-finite value produced by {0}")]
    NonFinite(String),

    #[error("training diverged at epoch {epoch}: {reason}")]
    Diverged { epoch: usize, reason: String },

    #[error("stage {stage} training failed")]
    Stage {
        stage: u8,
        #[source]
        source: Box<Error>,
    },

    #[error("metric {metric} needs {resource}")]
    MissingResource { metric: String, resource: &'static str },

    #[error("unknown metric {0:?}")]
    UnknownMetric(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
