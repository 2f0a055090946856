use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("insufficient history at day {t}: need {needed} prior days")]
    InsufficientHistory { t: usize, needed: usize },

    #[error("episode already finished; call reset first")]
    EpisodeDone,

    #[error("replay buffer holds {len} transitions, cannot sample {requested}")]
    Underfilled { len: usize, requested: usize },

    #[error("config: {key}: {message}")]
    Config { key: String, message: String },

    #[error("missing {what}; run `{command}` first")]
    MissingStage { what: String, command: String },

    #[error("sentiment backend: {0}")]
    Sentiment(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: u64, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by bad configuration or input data, as opposed
    /// to failures while running a stage.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. } | Error::InvalidInput(_) | Error::Config { .. } | Error::MissingStage { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
