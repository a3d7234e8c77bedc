use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument violates an operation's precondition.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("model fit failed: {0}")]
    Fit(String),

    /// Quadrature or other numerical routine failed to reach its tolerance.
    #[error("numerical failure: {message} (estimated error {estimated_error:e}, evaluations {evaluations})")]
    Numerical {
        message: String,
        estimated_error: f64,
        evaluations: usize,
    },

    #[error("inference failed: {0}")]
    Inference(String),

    #[error(
        "joint hypothesis space of {size} exceeds the cap of {cap}; \
         use a shorter synchronization interval or a smaller side schedule"
    )]
    Capacity { size: usize, cap: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("alignment failed: {0}")]
    Alignment(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    /// An internal self-check disagreed with itself.
    #[error("internal consistency check failed: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    /// True for errors caused by bad user input rather than a runtime failure.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Parameter(_) | Error::Parse { .. } | Error::Json(_) | Error::Io { .. }
        )
    }

    /// Wraps the error with context about where in a larger run it happened.
    pub fn context(self, ctx: impl std::fmt::Display) -> Self {
        match self {
            Error::Parameter(m) => Error::Parameter(format!("{ctx}: {m}")),
            Error::Fit(m) => Error::Fit(format!("{ctx}: {m}")),
            Error::Inference(m) => Error::Inference(format!("{ctx}: {m}")),
            Error::Numerical {
                message,
                estimated_error,
                evaluations,
            } => Error::Numerical {
                message: format!("{ctx}: {message}"),
                estimated_error,
                evaluations,
            },
            Error::Internal(m) => Error::Internal(format!("{ctx}: {m}")),
            Error::Parse { line, message } => Error::Parse {
                line,
                message: format!("{ctx}: {message}"),
            },
            Error::Alignment(m) => Error::Alignment(format!("{ctx}: {m}")),
            other => other,
        }
    }
}

/// Reads a JSON document, reporting syntax and schema errors with the path
/// and line.
pub(crate) fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line() as u64,
        message: format!("{}: {e}", path.display()),
    })
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
