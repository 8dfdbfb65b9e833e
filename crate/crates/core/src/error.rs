use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Failure modes shared by every operation in the crate.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A precondition on the inputs was violated.
    InvalidArgument(String),
    /// The computation produced a non-finite value or failed to converge.
    Numerical {
        message: String,
        /// Objective values recorded before the failure, when available.
        trace: Vec<f64>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>, trace: Vec<f64>) -> Self {
        Error::Numerical {
            message: msg.into(),
            trace,
        }
    }

    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical { .. })
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::Numerical { message, trace } => {
                write!(f, "numerical failure: {message}")?;
                if let Some(last) = trace.last() {
                    write!(
                        f,
                        " (after {} objective evaluations, last {last})",
                        trace.len()
                    )?;
                }
                Ok(())
            }
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
