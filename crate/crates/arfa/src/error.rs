use std::io;
use std::path::{Path, PathBuf};

/// Errors of the file-facing layer. Input problems (bad scenario, bad
/// ledger, bad flags) exit with 1, failures writing outputs with 2.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read {}: {source}", path.display())]
    Read { path: PathBuf, source: io::Error },

    #[error("cannot write {}: {source}", path.display())]
    Write { path: PathBuf, source: io::Error },

    #[error("malformed {}: {message}", path.display())]
    Malformed { path: PathBuf, message: String },

    #[error("{}: row {row}: {message}", path.display())]
    BadRow { path: PathBuf, row: u64, message: String },

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Model(#[from] arfa_core::Error),
}

impl Error {
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Write { .. } => 2,
            _ => 1,
        }
    }

    pub(crate) fn read(path: &Path, source: io::Error) -> Self {
        Error::Read { path: path.to_path_buf(), source }
    }

    pub(crate) fn write(path: &Path, source: io::Error) -> Self {
        Error::Write { path: path.to_path_buf(), source }
    }

    pub(crate) fn malformed(path: &Path, message: impl ToString) -> Self {
        Error::Malformed { path: path.to_path_buf(), message: message.to_string() }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
