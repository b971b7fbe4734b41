use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input data violates a type invariant (negative weight, self-loop, bad size...).
    #[error("validation error: {0}")]
    Validation(String),

    /// Two operands do not fit together.
    #[error("dimension mismatch: {what}: expected {expected}, got {got}")]
    Dimension {
        what: String,
        expected: String,
        got: String,
    },

    /// A numerical post-condition that theory guarantees did not hold.
    /// Points at a decomposition bug or badly conditioned input.
    #[error("structural error: {0}")]
    Structural(String),

    #[error("state diverged at t = {time} (|x|_inf = {norm:e})")]
    Diverged { time: f64, norm: f64 },

    /// An analysis was requested whose preconditions are not met.
    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn dimension(
        what: impl Into<String>,
        expected: impl std::fmt::Display,
        got: impl std::fmt::Display,
    ) -> Self {
        Error::Dimension {
            what: what.into(),
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
