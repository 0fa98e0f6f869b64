use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("resource cap: {0}")]
    Cap(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Io(_) => 2,
            CliError::Invariant(_) => 3,
            CliError::Cap(_) => 4,
        }
    }
}

impl From<spinldp_core::Error> for CliError {
    fn from(e: spinldp_core::Error) -> Self {
        match e {
            spinldp_core::Error::DimensionCap { .. } => CliError::Cap(e.to_string()),
            _ => CliError::Invariant(e.to_string()),
        }
    }
}

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
