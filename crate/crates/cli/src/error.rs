use thiserror::Error;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_VERIFICATION: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(String),
    #[error(transparent)]
    Numeric(#[from] hdim_core::Error),
    #[error("{0}")]
    Verification(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// Invalid user input detected by the core library counts as a parse
    /// error; everything else it raises is a numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => EXIT_PARSE,
            CliError::Numeric(e) if is_input_error(e) => EXIT_PARSE,
            CliError::Verification(_) => EXIT_VERIFICATION,
            _ => EXIT_NUMERIC,
        }
    }

    pub fn category(&self) -> &'static str {
        match self {
            CliError::Parse(_) => "PARSE_ERROR",
            CliError::Numeric(e) => e.category(),
            CliError::Verification(_) => "VERIFICATION_FAILURE",
            CliError::Io(_) => "IO_ERROR",
            CliError::Csv(_) => "CSV_ERROR",
            CliError::Json(_) => "JSON_ERROR",
        }
    }
}

fn is_input_error(e: &hdim_core::Error) -> bool {
    matches!(
        e,
        hdim_core::Error::InvalidInput(_) | hdim_core::Error::InvalidDimension(_) | hdim_core::Error::OutsideMainDisk(_)
    )
}
