use std::fmt;

/// CLI failure, split by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, configuration or input data (exit 1).
    Validation(String),
    /// Failure while running or writing results (exit 2).
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<incident_featlab::Error> for CliError {
    fn from(e: incident_featlab::Error) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}
