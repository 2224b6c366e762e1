use patchnav_core::bytesio::ByteError;
use patchnav_core::CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("missing artifact: {0}")]
    MissingArtifact(String),
    #[error("config hash mismatch: artifact has {found}, expected {expected}")]
    HashMismatch { found: String, expected: String },
    #[error("malformed trajectory store: {0}")]
    Malformed(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl From<ByteError> for MetricsError {
    fn from(e: ByteError) -> Self {
        MetricsError::Malformed(e.0)
    }
}
