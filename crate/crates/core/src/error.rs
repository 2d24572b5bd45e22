use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A column lies (numerically) in the span of the columns before it.
    #[error("rank deficient: column {column} is collinear with the columns already in the model")]
    RankDeficient { column: String },

    #[error("response has zero residual variance after the forced covariates")]
    EmptyVariance,

    #[error("invalid dimensions: {0}")]
    InvalidDims(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("too many covariates: p = {p} exceeds n - p0 - 1 = {limit}")]
    Dimension { p: usize, limit: i64 },

    #[error("column `{0}` not found")]
    MissingColumn(String),

    #[error("non-numeric cell at row {row}, column `{column}`: {value:?}")]
    NonNumericCell { row: usize, column: String, value: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Data,
    Numerical,
    Config,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Data => 2,
            ErrorCategory::Numerical => 3,
            ErrorCategory::Config => 4,
        }
    }
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::RankDeficient { .. } | Error::EmptyVariance | Error::Domain(_) => {
                ErrorCategory::Numerical
            }
            Error::InvalidDims(_) | Error::Unsupported(_) | Error::Config(_) => {
                ErrorCategory::Config
            }
            Error::File { source, .. } => source.category(),
            Error::Dimension { .. }
            | Error::MissingColumn(_)
            | Error::NonNumericCell { .. }
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_) => ErrorCategory::Data,
        }
    }

    pub(crate) fn in_file(self, path: impl Into<String>) -> Error {
        Error::File { path: path.into(), source: Box::new(self) }
    }
}
