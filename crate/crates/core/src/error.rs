use std::path::PathBuf;

use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure class, used by the CLI to choose an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    // ---- input files ----
    #[error("file not found: {0}")]
    MissingFile(PathBuf),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("unexpected column `{0}`")]
    UnexpectedColumn(String),
    #[error("malformed value {value:?} at row {row}, column `{column}`")]
    MalformedValue {
        row: usize,
        column: String,
        value: String,
    },
    #[error("malformed row {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("non-positive or non-finite price at row {row}, column `{column}`")]
    NonPositivePrice { row: usize, column: String },
    #[error("duplicate date {0}")]
    DuplicateDate(NaiveDate),
    #[error("negative volatility for ticker `{0}`")]
    NegativeVol(String),

    // ---- panel shape ----
    #[error("need at least {required} rows, got {rows}")]
    TooFewRows { rows: usize, required: usize },
    #[error("panels share fewer than two dates")]
    EmptyIntersection,
    #[error("estimation window of {len} rows is shorter than the required {required}")]
    WindowTooShort { len: usize, required: usize },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    // ---- numerics ----
    #[error("non-finite input: {0}")]
    NonFinite(String),
    #[error("coordinate descent did not converge within {max_iters} sweeps")]
    DidNotConverge { max_iters: usize },
    #[error("matrix is singular or ill-conditioned (condition number {cond:e})")]
    SingularMatrix { cond: f64 },
    #[error("cholesky factorization failed: {0}")]
    CholeskyFailure(String),
    #[error("box bound {bound} is infeasible for {n} assets (need n * bound >= 1)")]
    Infeasible { n: usize, bound: f64 },
    #[error("covariance is not positive semidefinite (smallest eigenvalue {min_eig:e})")]
    NotPsd { min_eig: f64 },
    #[error("account value is no longer positive on {0}")]
    AccountDepleted(NaiveDate),

    // ---- context wrappers ----
    #[error("asset {asset}: {source}")]
    AssetFit {
        asset: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("at {date}: {source}")]
    AtDate {
        date: NaiveDate,
        #[source]
        source: Box<Error>,
    },

    // ---- configuration ----
    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::InvalidParameter(_) => ErrorKind::Config,
            Error::MissingFile(_)
            | Error::Io { .. }
            | Error::MalformedHeader(_)
            | Error::MissingColumn(_)
            | Error::UnexpectedColumn(_)
            | Error::MalformedValue { .. }
            | Error::MalformedRow { .. }
            | Error::NonPositivePrice { .. }
            | Error::DuplicateDate(_)
            | Error::NegativeVol(_)
            | Error::TooFewRows { .. }
            | Error::EmptyIntersection
            | Error::WindowTooShort { .. }
            | Error::InsufficientData(_)
            | Error::DimensionMismatch(_) => ErrorKind::Data,
            Error::NonFinite(_)
            | Error::DidNotConverge { .. }
            | Error::SingularMatrix { .. }
            | Error::CholeskyFailure(_)
            | Error::Infeasible { .. }
            | Error::NotPsd { .. }
            | Error::AccountDepleted(_) => ErrorKind::Numerical,
            Error::AssetFit { source, .. } | Error::AtDate { source, .. } => source.kind(),
        }
    }

    pub(crate) fn at(self, date: NaiveDate) -> Self {
        Error::AtDate {
            date,
            source: Box::new(self),
        }
    }
}

pub(crate) fn dims(msg: impl Into<String>) -> Error {
    Error::DimensionMismatch(msg.into())
}
