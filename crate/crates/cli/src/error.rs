use std::path::Path;

use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{origin}:{line}: {message}")]
    Parse { origin: String, line: usize, message: String },
    #[error("{key}: {message}")]
    Range { key: String, message: String },
    #[error("{dir}: missing frame {index:06}.png")]
    Gap { dir: String, index: usize },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}: expected {expected}, found {found}")]
    Format { path: String, expected: &'static str, found: String },
    #[error("{0}")]
    Mismatch(String),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] bgmatte::Error),
}

impl CliError {
    pub fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        Self::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Parse { .. } => "parse",
            Self::Range { .. } => "range",
            Self::Gap { .. } => "gap",
            Self::Io { .. } => "io",
            Self::Format { .. } => "format",
            Self::Mismatch(_) => "mismatch",
            Self::Usage(_) => "usage",
            Self::Core(_) => "pipeline",
        }
    }

    /// Single-line JSON record for stderr.
    pub fn to_json_line(&self) -> String {
        serde_json::json!({ "error": self.kind(), "message": self.to_string() }).to_string()
    }
}
