use std::path::PathBuf;

use hdp_lpcm_core::Error as CoreError;

/// Everything that can stop a command.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Bad flags or configuration values.
    #[error("usage: {0}")]
    Usage(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: self-loop on actor {actor}")]
    SelfLoop { line: usize, actor: String },
    #[error("line {line}: {message}")]
    Range { line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// Malformed or inconsistent input files.
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Core(#[from] CoreError),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Process exit status for a failed command.
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => EXIT_USAGE,
            Self::Core(e) => match e {
                CoreError::Numerical(_)
                | CoreError::DegenerateDistribution { .. }
                | CoreError::Degenerate(_)
                | CoreError::Undefined(_) => EXIT_NUMERICAL,
                CoreError::Argument(_) | CoreError::Parameter(_) => EXIT_USAGE,
                _ => EXIT_INPUT,
            },
            _ => EXIT_INPUT,
        }
    }
}
