use std::path::PathBuf;

/// Everything that can stop a command, grouped by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: u64, message: String },

    #[error(transparent)]
    Numerical(#[from] sipm_core::Error),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{0}")]
    Mismatch(String),
}

impl CliError {
    pub const USAGE: u8 = 2;
    pub const PARSE: u8 = 3;
    pub const NUMERICAL: u8 = 4;
    pub const IO: u8 = 5;
    pub const MISMATCH: u8 = 1;

    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) => Self::USAGE,
            Self::Parse { .. } => Self::PARSE,
            Self::Numerical(_) => Self::NUMERICAL,
            Self::Io { .. } => Self::IO,
            Self::Mismatch(_) => Self::MISMATCH,
        }
    }

    pub(crate) fn parse(path: impl Into<String>, line: u64, message: impl Into<String>) -> Self {
        Self::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
