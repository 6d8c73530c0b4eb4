use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("cannot decode search point `{text}`: {reason}")]
    Decode { text: String, reason: String },

    #[error("task T{0} is not covered by any group")]
    Coverage(usize),

    #[error("non-finite value in parameter block `{0}`")]
    NonFinite(String),

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("evaluator transport error: {0}")]
    Transport(String),

    #[error("evaluation of `{point}` failed: {message}")]
    EvaluationFailed { point: String, message: String },

    #[error("enumeration refused: {0}")]
    GuardRefusal(String),

    #[error("checkpoint error in {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },

    #[error("{0} already exists (pass --force to overwrite)")]
    OutputExists(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn checkpoint(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Checkpoint {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// Transport failures leave the run resumable from its last checkpoint.
    pub fn is_retryable(&self) -> bool {
        matches!(self, Error::Transport(_))
    }

    /// Process exit status used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Decode { .. } | Error::OutputExists(_) => 2,
            Error::Transport(_) | Error::EvaluationFailed { .. } => 3,
            Error::GuardRefusal(_) => 4,
            Error::Checkpoint { .. } => 5,
            _ => 1,
        }
    }
}
