use strel_core::dataset::DatasetError;
use strel_core::neuro::NeuroError;
use strel_core::synthesis::SynthesisError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags or flag values.
    #[error("usage: {0}")]
    Usage(String),
    /// Unreadable, malformed or mismatched input and output files.
    #[error("{0}")]
    Input(String),
    /// A solver gave up.
    #[error("failed: {0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Input(_) => 3,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(format!("I/O error: {e}"))
    }
}

impl From<SynthesisError> for CliError {
    fn from(e: SynthesisError) -> Self {
        match e {
            SynthesisError::Optimizer(m) => CliError::Failed(m),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Synthesis(s) => s.into(),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<NeuroError> for CliError {
    fn from(e: NeuroError) -> Self {
        CliError::Input(e.to_string())
    }
}
