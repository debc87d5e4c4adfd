use std::path::PathBuf;

use thiserror::Error;

use crate::model::State;

/// Errors raised by the solver, diagnostics and persistence layers.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration value. `key` names the offending setting.
    #[error("configuration error in `{key}`{}: {msg}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Config {
        key: String,
        line: Option<usize>,
        msg: String,
    },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    /// A non-finite value appeared. Carries the last finite state.
    #[error("divergence detected after t = {t}")]
    Divergence { t: f64, last_good: Box<Option<State>> },

    #[error("missing data: {0}")]
    MissingData(String),

    #[error("malformed input {file}: row {row}, column `{column}`: {msg}")]
    Malformed {
        file: String,
        row: usize,
        column: String,
        msg: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            line: None,
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
