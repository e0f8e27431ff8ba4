use thiserror::Error;

/// Every failure mode the library reports.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("duplicate observation for firm `{firm}` in period {period}")]
    DuplicateKey { firm: String, period: i64 },
    #[error("panel contains no observations")]
    EmptyPanel,
    #[error("labor is zero or negative for firm `{firm}` in period {period}")]
    ZeroLabor { firm: String, period: i64 },
    #[error("column `{0}` is constant or has fewer than two observed values")]
    ConstantColumn(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("invalid configuration field `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },
    #[error("polynomial degree {0} exceeds the supported maximum")]
    DegreeTooHigh(usize),
    #[error("design matrix is rank deficient at column {0}")]
    RankDeficient(usize),
    #[error("non-positive `{field}` for firm `{firm}` in period {period}")]
    NonPositiveValue { field: String, firm: String, period: i64 },
    #[error("too few rows: need more than {needed}, have {have}")]
    TooFewRows { needed: usize, have: usize },
    #[error("optimizer did not converge (best objective {best_value:e})")]
    OptimizerDidNotConverge { best_value: f64 },
    #[error("no firm has two consecutive periods")]
    NoConsecutivePeriods,
    #[error("requested {requested} components but at most {max} are available")]
    TooManyComponents { requested: usize, max: usize },
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("row {0} has no observed entries")]
    AllMissingRow(usize),
    #[error("iteration did not converge after {iterations} iterations (last change {last_change:e})")]
    DidNotConverge { iterations: usize, last_change: f64 },
    #[error("input is empty")]
    EmptyInput,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("k = {k} exceeds the number of rows {n}")]
    KTooLarge { k: usize, n: usize },
    #[error("curve has {0} points; at least 3 are required")]
    CurveTooShort(usize),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
