use std::path::PathBuf;

use crate::config::ConfigError;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),

    #[error("{} already exists; pass --force to overwrite", .0.display())]
    Exists(PathBuf),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}: {message}", path.display())]
    Csv {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{}: {message}", path.display())]
    Snapshot { path: PathBuf, message: String },

    #[error(transparent)]
    Core(#[from] brdm_core::Error),

    /// A run finished but violated an accounting invariant.
    #[error("consistency check failed: {0}")]
    Check(String),

    #[error("worker pool: {0}")]
    Pool(String),
}

impl CliError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 for usage and configuration problems, 2 for
    /// everything that goes wrong while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Exists(_) => 1,
            _ => 2,
        }
    }
}
