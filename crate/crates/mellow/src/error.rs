use std::io;
use std::path::PathBuf;

use mellow_core::Error as CoreError;

/// Failure classes of the command-line tool, each with its own exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Schema(String),
    #[error("unsupported domain: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
}

pub type CliResult<T> = Result<T, CliError>;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io { .. } => EXIT_IO,
            CliError::Csv(e) if e.is_io_error() => EXIT_IO,
            CliError::Csv(_) | CliError::Schema(_) | CliError::Unsupported(_) => EXIT_DATA,
            CliError::Core(e) => match e {
                CoreError::InvalidParameter { .. } | CoreError::Empty | CoreError::TraceTooShort { .. } => EXIT_USAGE,
                CoreError::Dimension(_)
                | CoreError::NegativeProbability { .. }
                | CoreError::RowSum { .. }
                | CoreError::Discount(_)
                | CoreError::IndexOutOfRange { .. }
                | CoreError::NonFinite(_)
                | CoreError::Layout(_) => EXIT_DATA,
                _ => EXIT_NUMERIC,
            },
        }
    }
}
