use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] stlstm::Error),

    #[error("verification failed: {0}")]
    Verification(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    /// Process exit status: 1 usage/config, 2 data, 3 verification.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Core(stlstm::Error::InvalidArgument(_)) => 1,
            CliError::Core(_) => 2,
            CliError::Verification(_) => 3,
        }
    }
}
