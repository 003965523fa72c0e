use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by model construction and inference.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dataset is empty")]
    EmptyDataset,

    #[error("column `{column}` has {found} entries, expected {expected}")]
    LengthMismatch {
        column: String,
        expected: usize,
        found: usize,
    },

    #[error("study `{label}`: standard error must be positive, got {value}")]
    NonPositiveStdErr { label: String, value: f64 },

    #[error("study `{label}`: `{field}` is not finite")]
    NonFinite { label: String, field: String },

    #[error("duplicate study label `{0}`")]
    DuplicateLabel(String),

    #[error("unknown study label `{0}`")]
    UnknownLabel(String),

    #[error("unknown covariate `{0}`")]
    UnknownCovariate(String),

    #[error("row {row}: {message}")]
    Csv { row: usize, message: String },

    #[error("missing required column `{0}`")]
    MissingColumn(String),

    #[error("input contains no data rows")]
    EmptyInput,

    #[error("unknown dataset `{0}`")]
    UnknownDataset(String),

    #[error("dataset `{0}` is registered but its values are not bundled in this build; supply it as a CSV file")]
    NotBundled(String),

    #[error(
        "design matrix is rank deficient: column `{column}` is collinear with {collinear_with:?}"
    )]
    RankDeficient {
        column: String,
        collinear_with: Vec<String>,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("{0}")]
    Domain(String),

    #[error(
        "posterior is improper under the uniform heterogeneity prior with k = {k} studies and \
         p = {p} coefficients (k - p must be at least 2); use a proper prior such as halfnormal:<scale>"
    )]
    ImproperPosterior { k: usize, p: usize },

    #[error("{analysis} requires at least {needed} studies, got {k}")]
    TooFewStudies {
        analysis: &'static str,
        k: usize,
        needed: usize,
    },

    #[error("unsupported design: {0}")]
    UnsupportedDesign(String),

    #[error("numerical failure: {0}")]
    Numeric(String),
}

impl Error {
    /// True for errors caused by malformed or inconsistent input rather
    /// than by the model or the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::EmptyDataset
                | Error::LengthMismatch { .. }
                | Error::NonPositiveStdErr { .. }
                | Error::NonFinite { .. }
                | Error::DuplicateLabel(_)
                | Error::UnknownLabel(_)
                | Error::UnknownCovariate(_)
                | Error::Csv { .. }
                | Error::MissingColumn(_)
                | Error::EmptyInput
                | Error::UnknownDataset(_)
                | Error::NotBundled(_)
                | Error::Dimension { .. }
                | Error::Domain(_)
        )
    }
}
