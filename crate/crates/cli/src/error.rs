use rsa2_core::data::DataError;
use rsa2_core::dist::DistError;
use rsa2_core::learn::LearnError;
use rsa2_core::llm::LlmError;
use rsa2_core::provider::ProviderError;
use rsa2_core::rsc::RscError;
use rsa2_core::ModelError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(#[from] DataError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("output check failed for {path}: {message}")]
    Output { path: String, message: String },
    #[error("provider: {0}")]
    Provider(#[from] ProviderError),
    #[error("model: {0}")]
    Model(#[from] ModelError),
    #[error("training: {0}")]
    Learn(#[from] LearnError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) | CliError::Io { .. } | CliError::Output { .. } => 3,
            CliError::Provider(_) => 4,
            CliError::Model(_) | CliError::Learn(_) => 5,
        }
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }
}

impl From<DistError> for CliError {
    fn from(e: DistError) -> Self {
        CliError::Model(e.into())
    }
}

impl From<LlmError> for CliError {
    fn from(e: LlmError) -> Self {
        match e {
            LlmError::Provider(p) => CliError::Provider(p),
            LlmError::Model(m) => CliError::Model(m),
            LlmError::Dist(d) => d.into(),
        }
    }
}

impl From<RscError> for CliError {
    fn from(e: RscError) -> Self {
        match e {
            RscError::Provider(p) => CliError::Provider(p),
            RscError::Model(m) => CliError::Model(m),
            RscError::Dist(d) => d.into(),
            other => CliError::Model(rsa2_core::ModelError::InvalidModel(other.to_string())),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
