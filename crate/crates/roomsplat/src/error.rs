use std::path::{Path, PathBuf};

use roomsplat_core::diffusion::ProviderError;
use roomsplat_core::optim::OptimError;

/// Everything a command can fail with, grouped by exit code.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Provider(ProviderError),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io { path: path.to_path_buf(), source }
    }

    pub fn invalid(msg: impl std::fmt::Display) -> Self {
        Error::Validation(msg.to_string())
    }

    /// 0 success, 2 validation, 3 transport or provider, 4 numerical.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Io { .. } | Error::Validation(_) => 2,
            Error::Provider(_) => 3,
            Error::Numerical(_) => 4,
        }
    }
}

impl From<ProviderError> for Error {
    fn from(e: ProviderError) -> Self {
        match e {
            ProviderError::NonFinite => Error::Numerical(e.to_string()),
            e => Error::Provider(e),
        }
    }
}

impl From<OptimError> for Error {
    fn from(e: OptimError) -> Self {
        match e {
            OptimError::Provider(p) => p.into(),
            OptimError::NonFinite(_) => Error::Numerical(e.to_string()),
            e => Error::Validation(e.to_string()),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
