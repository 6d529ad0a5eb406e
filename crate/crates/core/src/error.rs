use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("schema error: missing column `{0}`")]
    MissingColumn(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at data row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("design matrix is rank deficient ({0}); retry with a small ridge jitter")]
    RankDeficient(String),

    #[error("outcome family mismatch: {0}")]
    Family(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("training diverged at epoch {epoch}: loss became non-finite")]
    TrainingDivergence { epoch: usize },

    #[error("protected attribute has fewer than two observed levels ({0}); the mixture is vacuous")]
    DegenerateProtected(String),

    #[error("insufficient covariates: {0}")]
    InsufficientCovariates(String),

    #[error("degenerate group: {0}")]
    DegenerateGroup(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("unknown algorithm `{name}`; registered algorithms: {registered}")]
    UnknownAlgorithm { name: String, registered: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("no results found in {}", .0.display())]
    NoResults(PathBuf),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Coarse failure classes, used by the command line for exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numeric,
    Io,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Config => 2,
            ErrorClass::Data => 3,
            ErrorClass::Numeric => 4,
            ErrorClass::Io => 5,
        }
    }
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::UnknownAlgorithm { .. } | Error::Usage(_) | Error::Contract(_) => {
                ErrorClass::Config
            }
            Error::InvalidDimension(_)
            | Error::EmptyDataset(_)
            | Error::Shape(_)
            | Error::MissingColumn(_)
            | Error::Schema(_)
            | Error::Parse { .. }
            | Error::Family(_)
            | Error::DegenerateProtected(_)
            | Error::InsufficientCovariates(_)
            | Error::DegenerateGroup(_)
            | Error::NoResults(_) => ErrorClass::Data,
            Error::RankDeficient(_) | Error::TrainingDivergence { .. } | Error::Numeric(_) => {
                ErrorClass::Numeric
            }
            Error::Io(_) | Error::Csv(_) => ErrorClass::Io,
        }
    }
}
