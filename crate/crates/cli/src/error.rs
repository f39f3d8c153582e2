use thiserror::Error;

/// Exit status for a successful run.
pub const EXIT_OK: i32 = 0;
/// Invalid configuration, violated hypothesis or failed validation.
pub const EXIT_VALIDATION: i32 = 1;
/// Numerical failure or unwritable output.
pub const EXIT_NUMERIC: i32 = 2;
/// Command-line usage error.
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error(transparent)]
    Library(#[from] wigner_clt::Error),
    #[error("cannot write output: {0}")]
    Output(#[from] std::io::Error),
    #[error("cannot serialize output: {0}")]
    Serialize(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use wigner_clt::Error as E;
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Config(_) | CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Library(e) => match e {
                E::Hypothesis(_)
                | E::InvalidArgument(_)
                | E::Domain(_)
                | E::Construction(_)
                | E::Parse(_)
                | E::Io(_) => EXIT_VALIDATION,
                E::RealAxis(_) | E::Convergence(_) | E::NearSingular(_) | E::Numeric(_) => EXIT_NUMERIC,
            },
            CliError::Output(_) | CliError::Serialize(_) => EXIT_NUMERIC,
        }
    }
}
