use pfpp_core::Error;

/// Exit statuses.
pub mod exit {
    pub const OK: u8 = 0;
    pub const VALIDATION: u8 = 2;
    pub const TOLERANCE: u8 = 3;
    pub const USAGE: u8 = 64;
    pub const DATA: u8 = 65;
    pub const NO_INPUT: u8 = 66;
    pub const CANT_CREATE: u8 = 73;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("malformed input: {0}")]
    Json(String),

    #[error("validation failed: {0}")]
    Validation(Error),

    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Json(_) => exit::DATA,
            CliError::Validation(Error::ImaginaryPart(_) | Error::NotNormalized { .. }) => {
                exit::TOLERANCE
            }
            CliError::Validation(_) => exit::VALIDATION,
            CliError::Read { .. } => exit::NO_INPUT,
            CliError::Write { .. } => exit::CANT_CREATE,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Validation(e)
    }
}
