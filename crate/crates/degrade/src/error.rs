use thiserror::Error;

#[derive(Debug, Error)]
pub enum DegradeError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("image codec: {0}")]
    Codec(#[from] image::ImageError),
    #[error("{0}")]
    Contract(String),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("content hash mismatch for {path}")]
    HashMismatch { path: String },
    #[error("sample {id} has no bounding box but the transform needs one")]
    MissingBox { id: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, DegradeError>;
