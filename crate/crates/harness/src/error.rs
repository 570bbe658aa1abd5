use std::path::PathBuf;

use thiserror::Error;

/// Harness failures, grouped by the process exit code they map to.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error at `{path}`: {reason}")]
    Config { path: String, reason: String },

    #[error(transparent)]
    Core(#[from] otfs_isac::Error),

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

impl HarnessError {
    pub fn config(path: impl Into<String>, reason: impl Into<String>) -> Self {
        HarnessError::Config {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 configuration, 3 numerical guard, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        use otfs_isac::Error as E;
        match self {
            HarnessError::Config { .. } => 2,
            HarnessError::Core(E::Config { .. } | E::Shape { .. }) => 2,
            HarnessError::Core(E::Domain(_) | E::Numerical(_)) => 3,
            HarnessError::Io { .. } | HarnessError::Csv(_) => 4,
        }
    }
}
