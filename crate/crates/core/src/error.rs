//! Error types shared across the evaluation pipeline.

use std::path::PathBuf;

/// Top-level error for evaluation runs.
#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    /// Invalid configuration (bad thresholds, missing judge, unknown format).
    #[error("configuration error: {0}")]
    Config(String),

    /// Filesystem problem reading or writing a corpus or report.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A corpus line that must be well-formed is not (ground truth is parsed
    /// strictly; duplicate or missing sample ids are also corpus errors).
    #[error("corpus error: {0}")]
    Corpus(String),

    /// Judge-side failure; carries enough context to identify the sample.
    #[error(transparent)]
    Judge(#[from] crate::judge::JudgeError),

    /// An aggregation was requested over an empty input.
    #[error("{0}")]
    NoSamples(String),
}

impl EvalError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        EvalError::Io {
            path: path.into(),
            source,
        }
    }
}
