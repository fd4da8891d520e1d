use orbit_core::CoreError;
use orbit_cryo::CryoError;
use orbit_mra::MraError;
use orbit_nn::NnError;
use thiserror::Error;

/// Failures grouped by the exit code they map to.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration: unknown or mistyped fields, invalid values.
    #[error("config error: {0}")]
    Schema(String),
    /// Missing, unreadable or malformed files.
    #[error("i/o error: {0}")]
    Io(String),
    /// Divergence, non-finite values, failed reproduction.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema(_) => 1,
            CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Io(_) | CoreError::Format(_) | CoreError::Json(_) => CliError::Io(e.to_string()),
            CoreError::NonFinite(_) => CliError::Numerical(e.to_string()),
            CoreError::Shape(_) | CoreError::Invalid(_) => CliError::Schema(e.to_string()),
        }
    }
}

impl From<NnError> for CliError {
    fn from(e: NnError) -> Self {
        match e {
            NnError::Core(c) => c.into(),
            NnError::Io(_) | NnError::Json(_) | NnError::Format(_) => CliError::Io(e.to_string()),
            NnError::NonFinite(_) => CliError::Numerical(e.to_string()),
            NnError::Shape(_) | NnError::NotScalar(_) | NnError::Arch(_) => CliError::Schema(e.to_string()),
        }
    }
}

impl From<MraError> for CliError {
    fn from(e: MraError) -> Self {
        match e {
            MraError::Core(c) => c.into(),
            MraError::Nn(n) => n.into(),
            MraError::Numerical(_) => CliError::Numerical(e.to_string()),
            MraError::Invalid(_) | MraError::Shape(_) => CliError::Schema(e.to_string()),
        }
    }
}

impl From<CryoError> for CliError {
    fn from(e: CryoError) -> Self {
        match e {
            CryoError::Core(c) => c.into(),
            CryoError::Nn(n) => n.into(),
            CryoError::Numerical(_) => CliError::Numerical(e.to_string()),
            CryoError::Io(_) | CryoError::Format(_) => CliError::Io(e.to_string()),
            CryoError::Invalid(_) | CryoError::Shape(_) => CliError::Schema(e.to_string()),
        }
    }
}
