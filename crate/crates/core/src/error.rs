use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = VcsError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum VcsError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl VcsError {
    /// Short machine-readable tag used by the CLI error prefix.
    pub fn kind(&self) -> &'static str {
        match self {
            VcsError::Dimension(_) => "dimension",
            VcsError::Capacity(_) => "capacity",
            VcsError::Numeric(_) => "numeric",
            VcsError::InvalidArgument(_) => "usage",
            VcsError::Format { .. } => "format",
            VcsError::Config(_) => "config",
            VcsError::Io { .. } => "io",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        VcsError::Io { path: path.into(), source }
    }
}

macro_rules! dim_err {
    ($($arg:tt)*) => {
        $crate::error::VcsError::Dimension(format!($($arg)*))
    };
}
pub(crate) use dim_err;
