use thiserror::Error;

#[derive(Debug, Error)]
pub enum DistillError {
    #[error("config: {0}")]
    Config(String),

    #[error("data: {0}")]
    Data(String),

    /// Training is aborted rather than allowed to continue with poisoned
    /// parameters; the position makes divergence reproducible.
    #[error("loss became non-finite at phase {phase}, epoch {epoch}, batch {batch}: {source}")]
    NonFinite {
        phase: u32,
        epoch: u32,
        batch: usize,
        source: cqd_tensor::TensorError,
    },

    #[error(transparent)]
    Tensor(#[from] cqd_tensor::TensorError),

    #[error(transparent)]
    Net(#[from] cqd_nets::NetError),

    #[error(transparent)]
    Degrade(#[from] cqd_degrade::DegradeError),
}

pub type Result<T> = std::result::Result<T, DistillError>;
