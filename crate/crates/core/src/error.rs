use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV input")]
    Csv(#[from] csv::Error),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("non-numeric or non-finite value {value:?} at row {row}, column `{column}`")]
    NonNumericCell {
        row: usize,
        column: String,
        value: String,
    },
    #[error("well `{0}` has a single cell; within-well standard deviations need at least two")]
    WellWithSingleCell(String),
    #[error("duplicate well id `{0}`")]
    DuplicateWell(String),
    #[error("duplicate or empty feature name `{0}`")]
    BadFeatureName(String),
    #[error("ranks are not a permutation of 1..{0}")]
    RankNotPermutation(usize),
    #[error("class `{class}` of well `{well}` is inconsistent with its rank {rank}")]
    ClassRankInconsistent {
        well: String,
        rank: usize,
        class: String,
    },
    #[error("unknown class label `{0}` (expected Low, Medium or High)")]
    UnknownClass(String),
    #[error("well ids do not match; symmetric difference: {}", .0.join(","))]
    WellIdMismatch(Vec<String>),
    #[error("empty input")]
    EmptyInput,
    #[error("quantile level {0} is outside (0, 1)")]
    QOutOfRange(f64),
    #[error("standard deviation of a single value is undefined")]
    SdOfSingleton,
    #[error("invalid summary configuration: {0}")]
    InvalidSummary(String),
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("column `{0}` has zero variance")]
    ZeroVarianceColumn(String),
    #[error("column {column} of well `{well}` has zero within-well variance")]
    ZeroVarianceBlock { well: String, column: usize },
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("DWD solver did not converge after {iterations} iterations (KKT residual {residual:e})")]
    NonConverged { iterations: usize, residual: f64 },
    #[error("class {0} is absent from the training data")]
    MissingClass(String),
    #[error("well `{0}` has no classified cells")]
    EmptyWell(String),
    #[error("leave-one-out fold holding out well `{well}` lacks class {class} in training")]
    FoldMissingClass { well: String, class: String },
    #[error("unsupported pipeline: {0}")]
    UnsupportedPipeline(String),
    #[error("at least two wells are required for a well-level variance")]
    TooFewWells,
    #[error("statistic `{0}` is not a quantile; closed-form uncertainty covers quantiles only")]
    NonQuantileStatistic(String),
    #[error("direction is not a unit vector (norm {0})")]
    NotUnitVector(f64),
    #[error("random correlation matrix was singular on {0} consecutive draws")]
    SingularGram(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("replication with seed {seed} failed")]
    Replication {
        seed: u64,
        #[source]
        source: Box<Error>,
    },
    #[error("malformed model file: {0}")]
    ModelFormat(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
