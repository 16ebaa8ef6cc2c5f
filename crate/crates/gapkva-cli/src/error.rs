use std::fmt;

/// CLI failure classes, mapped onto process exit codes:
/// config errors exit 2, numerical failures exit 3, anything else 1.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Numerical(msg) => write!(f, "numerical failure: {msg}"),
            CliError::Io(msg) => write!(f, "io error: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<gapkva::Error> for CliError {
    fn from(e: gapkva::Error) -> Self {
        match e {
            gapkva::Error::InvalidInput { .. } => CliError::Config(e.to_string()),
            gapkva::Error::Numerical { .. } => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
