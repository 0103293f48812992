use std::path::PathBuf;

use thiserror::Error;

/// Every failure the toolkit can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("parse error at data row {row}, column `{column}`: {message}")]
    ParseError {
        row: usize,
        column: String,
        message: String,
    },
    #[error("dataset has no data rows")]
    EmptyDataset,
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("class `{class}` has {count} row(s); at least {required} required")]
    DegenerateClass {
        class: String,
        count: usize,
        required: usize,
    },
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("single class present; at least two classes required")]
    SingleClass,
    #[error("total variance is zero")]
    RankDeficient,
    #[error("only {available} distinct features available, {requested} requested")]
    InsufficientFeatures { available: usize, requested: usize },
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("dimension mismatch: expected {expected} columns, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("unsupported model document version `{0}`")]
    VersionMismatch(String),
    #[error("malformed document: {0}")]
    MalformedDocument(String),
    #[error("fold too small: {0}")]
    FoldTooSmall(String),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("class code {code} out of range for {n_classes} classes")]
    CodeOutOfRange { code: usize, n_classes: usize },
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Coarse category used by front-ends to pick an exit status.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::MissingColumn(_)
                | Error::ParseError { .. }
                | Error::EmptyDataset
                | Error::UnknownClass(_)
                | Error::DegenerateClass { .. }
                | Error::SchemaMismatch(_)
                | Error::SingleClass
                | Error::RankDeficient
                | Error::InsufficientFeatures { .. }
                | Error::DegenerateInput(_)
                | Error::DimensionMismatch { .. }
                | Error::VersionMismatch(_)
                | Error::MalformedDocument(_)
                | Error::FoldTooSmall(_)
                | Error::LengthMismatch(..)
                | Error::CodeOutOfRange { .. }
                | Error::EmptyMatrix
                | Error::Io { .. }
                | Error::Csv(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
