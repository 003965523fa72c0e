use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] metatrace::Error),

    #[error("grid needs at least {min} points, got {found}")]
    GridTooSmall { min: usize, found: usize },

    #[error("grid upper end must be positive and finite, got {0}")]
    GridExtent(f64),

    #[error("{what}: expected {expected} entries, found {found}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("trace csv line {line}: {message}")]
    TraceCsv { line: u64, message: String },
}
