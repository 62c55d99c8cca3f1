use std::fmt;

/// Failure classes mapped onto process exit codes: I/O trouble exits 1,
/// rejected configuration or data exits 2, a link that cannot carry a key
/// exits 3.
#[derive(Debug)]
pub enum CliError {
    Io(String),
    Validation(String),
    Infeasible(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Infeasible(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io(msg) | CliError::Validation(msg) | CliError::Infeasible(msg) => {
                f.write_str(msg)
            }
        }
    }
}

impl From<cvqkd::Error> for CliError {
    fn from(err: cvqkd::Error) -> Self {
        match err {
            cvqkd::Error::InfeasibleLink(_) => CliError::Infeasible(err.to_string()),
            _ => CliError::Validation(err.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
