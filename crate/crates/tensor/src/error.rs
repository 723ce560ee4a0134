use thiserror::Error;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("non-finite values encountered in {0}")]
    NonFinite(String),

    #[error("backward already ran on this graph; reset before calling again")]
    DoubleBackward,

    #[error("variable does not track gradients: {0}")]
    NoGradient(String),
}

pub type Result<T> = std::result::Result<T, TensorError>;
