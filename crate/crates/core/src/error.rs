use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot:e} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("degenerate regressor: sample variance {variance:e} is below tolerance")]
    DegenerateRegressor { variance: f64 },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("need at least {required} observations, got {actual}")]
    TooFewObservations { required: usize, actual: usize },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("zero loading: {0}")]
    ZeroLoading(&'static str),

    #[error("assumption violated: {0}")]
    AssumptionViolated(String),

    #[error("dataset is missing the `{0}` column")]
    MissingColumn(&'static str),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("only {found} rows fell in the conditioning band (need {required})")]
    EmptyConditioningBand { found: usize, required: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("worker pool: {0}")]
    WorkerPool(String),

    #[error("scenario {id}: {source}")]
    InScenario { id: String, source: Box<Error> },
}

impl Error {
    pub(crate) fn in_scenario(self, id: &str) -> Self {
        Error::InScenario {
            id: id.to_string(),
            source: Box::new(self),
        }
    }
}
