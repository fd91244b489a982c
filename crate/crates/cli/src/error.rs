use std::path::PathBuf;

use thiserror::Error;

/// Process exit status for each failure class.
pub mod exit {
    pub const OK: i32 = 0;
    /// I/O failures, malformed CSV input and other runtime errors.
    pub const FAILURE: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const DIVERGENCE: i32 = 3;
    pub const COMPARISON: i32 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),
    #[error("run diverged: {0}")]
    Divergence(ldfa_core::Error),
    #[error(transparent)]
    Engine(ldfa_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {detail}")]
    Csv { path: PathBuf, detail: String },
    #[error("overlap deviation {deviation} exceeds tolerance {tolerance}")]
    Comparison { deviation: f64, tolerance: f64 },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Divergence(_) => exit::DIVERGENCE,
            CliError::Comparison { .. } => exit::COMPARISON,
            CliError::Engine(_) | CliError::Io { .. } | CliError::Csv { .. } => exit::FAILURE,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<ldfa_core::Error> for CliError {
    fn from(e: ldfa_core::Error) -> Self {
        match e {
            ldfa_core::Error::Divergence { .. } | ldfa_core::Error::OdeDivergence { .. } => CliError::Divergence(e),
            ldfa_core::Error::InvalidInput(_) | ldfa_core::Error::InvalidRank(_) | ldfa_core::Error::Dimension(_) => {
                CliError::Config(vec![e.to_string()])
            }
            other => CliError::Engine(other),
        }
    }
}
