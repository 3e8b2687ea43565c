use polystab_core::Error as CoreError;

/// Process exit codes.
pub const EXIT_PASS: i32 = 0;
pub const EXIT_CONDITION_FAILED: i32 = 1;
pub const EXIT_INVALID_INPUT: i32 = 2;
pub const EXIT_NUMERIC_FAILURE: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn reason(&self) -> &'static str {
        match self {
            CliError::Config(_) => "invalid_config",
            CliError::Core(e) => e.reason(),
            CliError::Io(_) => "io",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_INVALID_INPUT,
            CliError::Core(e) if e.is_input_error() => EXIT_INVALID_INPUT,
            CliError::Core(_) | CliError::Io(_) => EXIT_NUMERIC_FAILURE,
        }
    }
}
