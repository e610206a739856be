use std::path::PathBuf;

/// Errors produced anywhere in the decomposition / conformal pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("series is empty")]
    EmptySeries,
    #[error("length mismatch: {what} has {got} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("period {period} is too large for a series of length {len} (needs period <= len / 2)")]
    PeriodTooLarge { period: usize, len: usize },
    #[error("period must be at least 2, got {0}")]
    PeriodTooSmall(usize),
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("series too short: need at least {needed} points, got {got}")]
    SeriesTooShort { needed: usize, got: usize },
    #[error("too few points for smoothing: span {span} needs at least {needed} points, got {got}")]
    TooFewPoints {
        span: usize,
        needed: usize,
        got: usize,
    },
    #[error("moving-average window {window} exceeds series length {len}")]
    WindowTooLarge { window: usize, len: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("design matrix is rank deficient; use a positive ridge penalty")]
    SingularDesign,
    #[error("dimension mismatch: expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("bootstrap failed to leave every row out-of-bag after {retries} retries")]
    CoverageFailure { retries: usize },
    #[error("all weights are zero")]
    AllZeroWeights,
    #[error("miscoverage rate must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("too few rows: {rows} rows cannot be split into {folds} folds")]
    TooFewRows { rows: usize, folds: usize },
    #[error("neighbourhood {k} is too large for period {period} (needs k < period / 2)")]
    NeighborhoodTooLarge { k: usize, period: usize },
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("non-numeric cell at row {row}, column `{column}`: {value:?}")]
    NonNumericCell {
        row: usize,
        column: String,
        value: String,
    },
    #[error("file has no data rows: {0}")]
    EmptyFile(PathBuf),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
