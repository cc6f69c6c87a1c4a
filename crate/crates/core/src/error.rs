use thiserror::Error;

use crate::linprog::{LpError, LpProblem, LpStatus};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("model error: {0}")]
    Model(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("rank error: {0}")]
    Rank(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("{context}: linear program ended {status:?}")]
    UnexpectedLp {
        context: String,
        status: LpStatus,
        problem: Box<LpProblem>,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse error class, used to pick a process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numerical,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::Input(_) | Error::Model(_) | Error::Domain(_) | Error::Io { .. } => {
                ErrorKind::Data
            }
            Error::Rank(_) | Error::Numerical(_) | Error::UnexpectedLp { .. } => {
                ErrorKind::Numerical
            }
            Error::Lp(LpError::Shape(_)) => ErrorKind::Data,
            Error::Lp(_) => ErrorKind::Numerical,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numerical => 4,
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
