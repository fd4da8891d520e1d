use thiserror::Error;

#[derive(Debug, Error)]
pub enum CryoError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("malformed file: {0}")]
    Format(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Core(#[from] orbit_core::CoreError),
    #[error(transparent)]
    Nn(#[from] orbit_nn::NnError),
}

pub type Result<T> = std::result::Result<T, CryoError>;
