/// Exit code 2 for usage errors, 1 for runtime errors.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<gut_core::Error> for CliError {
    fn from(e: gut_core::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<gut_server::LoadError> for CliError {
    fn from(e: gut_server::LoadError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<gut_server::ServeError> for CliError {
    fn from(e: gut_server::ServeError) -> Self {
        CliError::Runtime(e.to_string())
    }
}
