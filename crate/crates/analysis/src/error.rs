use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("contract: {0}")]
    Contract(String),

    #[error("non-finite values: {0}")]
    NonFinite(String),

    /// A saliency map with no mass makes the in-box fraction undefined.
    #[error("saliency map has zero total mass")]
    ZeroMass,

    #[error(transparent)]
    Tensor(#[from] cqd_tensor::TensorError),

    #[error(transparent)]
    Net(#[from] cqd_nets::NetError),

    #[error(transparent)]
    Degrade(#[from] cqd_degrade::DegradeError),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, AnalysisError>;
