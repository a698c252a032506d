use mgvi_autodiff::TensorError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MotionError {
    #[error(transparent)]
    Core(#[from] mgvi_core::Error),
    #[error("tensor: {0}")]
    Tensor(#[from] TensorError),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("sequence of {len} frames exceeds max_len {max_len}")]
    TooLong { len: usize, max_len: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("training dataset is empty")]
    EmptyDataset,
    #[error("training pair {index}: {msg}")]
    InconsistentPair { index: usize, msg: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("checkpoint config mismatch: {field} is {found} in the file, expected {expected}")]
    ConfigMismatch { field: String, expected: i64, found: i64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, MotionError>;
