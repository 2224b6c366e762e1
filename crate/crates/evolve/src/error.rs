use patchnav_core::bytesio::ByteError;
use patchnav_core::CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvolveError {
    #[error("invalid evolution config: {0}")]
    InvalidConfig(String),
    #[error("missing artifact: {0}")]
    MissingArtifact(String),
    #[error("config hash mismatch: run dir has {found}, expected {expected}")]
    HashMismatch { found: String, expected: String },
    #[error("malformed artifact: {0}")]
    Malformed(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl From<ByteError> for EvolveError {
    fn from(e: ByteError) -> Self {
        EvolveError::Malformed(e.0)
    }
}
