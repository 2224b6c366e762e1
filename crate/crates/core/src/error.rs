use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid action scalar: {0}")]
    InvalidAction(f64),
    #[error("invalid arena: {0}")]
    InvalidArena(String),
    #[error("invalid vision parameters: {0}")]
    InvalidVision(String),
    #[error("invalid architecture: {0}")]
    InvalidArch(String),
    #[error("parameter vector length {got} does not match architecture ({want})")]
    ParamLength { got: usize, want: usize },
    #[error("frame width {got} does not match architecture input width {want}")]
    ShapeMismatch { got: usize, want: usize },
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed checkpoint: {0}")]
    BadCheckpoint(String),
}
