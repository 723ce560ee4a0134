use cqd_tensor::TensorError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file: {0}")]
    Format(String),
    #[error("unsupported checkpoint version {found}")]
    Version { found: u16 },
    #[error("unreadable checkpoint header: {0}")]
    Header(String),
    #[error("checkpoint payload inconsistent: {0}")]
    Payload(String),
    #[error("checkpoint truncated: need {need} bytes, have {have}")]
    Truncated { need: u64, have: u64 },
    #[error("tensor table does not match architecture: {0}")]
    Shape(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("invalid architecture: {0}")]
    Arch(String),
}

pub type Result<T> = std::result::Result<T, NetError>;
