use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

pub const EXIT_INPUT: u8 = 2;
pub const EXIT_MODEL: u8 = 3;
pub const EXIT_IO: u8 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed data, flags or configuration.
    #[error("{0}")]
    Input(String),

    /// The model could not be fitted or a numerical routine failed.
    #[error("{0}")]
    Model(String),

    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Model(_) => EXIT_MODEL,
            CliError::Io(_) => EXIT_IO,
        }
    }

    pub fn io(context: impl std::fmt::Display, err: std::io::Error) -> Self {
        CliError::Io(format!("{context}: {err}"))
    }
}

impl From<metatrace::Error> for CliError {
    fn from(e: metatrace::Error) -> Self {
        if e.is_input_error() {
            CliError::Input(e.to_string())
        } else {
            CliError::Model(e.to_string())
        }
    }
}

impl From<metatrace_plots::Error> for CliError {
    fn from(e: metatrace_plots::Error) -> Self {
        use metatrace_plots::Error as P;
        match e {
            P::Model(inner) => inner.into(),
            P::GridTooSmall { .. } | P::GridExtent(_) | P::TraceCsv { .. } => {
                CliError::Input(e.to_string())
            }
            P::LengthMismatch { .. } => CliError::Model(e.to_string()),
        }
    }
}
