use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Contract(String),
    #[error("labels file: {0}")]
    Labels(String),
    #[error(transparent)]
    Degrade(#[from] cqd_degrade::DegradeError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, DataError>;
