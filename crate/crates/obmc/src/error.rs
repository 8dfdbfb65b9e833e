use std::fmt;
use std::path::PathBuf;

/// Errors from configuration, files and experiment runs.
#[derive(Debug)]
pub enum Error {
    /// A failure reported by the estimation core.
    Core(obmc_core::Error),
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    /// A malformed or inconsistent configuration or argument.
    Config(String),
    /// A malformed input file.
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    /// A sweep cell in which too many replicates failed.
    CellFailed {
        cell: String,
        failed: usize,
        total: usize,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// Process exit status: 2 for numerical failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Core(e) if e.is_numerical() => 2,
            Error::CellFailed { .. } => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Core(e) => write!(f, "{e}"),
            Error::Io { path, source } => write!(f, "{}: {source}", path.display()),
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::Parse {
                path,
                line,
                message,
            } => {
                write!(f, "{}:{line}: {message}", path.display())
            }
            Error::CellFailed {
                cell,
                failed,
                total,
            } => {
                write!(f, "cell {cell}: {failed} of {total} replicates failed")
            }
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Core(e) => Some(e),
            Error::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}

impl From<obmc_core::Error> for Error {
    fn from(e: obmc_core::Error) -> Self {
        Error::Core(e)
    }
}
