use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("loss node must be a scalar, has {0} elements")]
    NotScalar(usize),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("invalid architecture: {0}")]
    Arch(String),
    #[error("parameter file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Core(#[from] orbit_core::CoreError),
}

pub type Result<T> = std::result::Result<T, NnError>;
