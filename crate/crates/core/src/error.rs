use thiserror::Error;

/// Errors raised by the graph, transport and prediction routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("adjacency matrix is not square ({rows}x{cols})")]
    NonSquare { rows: usize, cols: usize },

    #[error("adjacency matrix is not symmetric (max asymmetry {0:e})")]
    AsymmetricAdjacency(f64),

    #[error("adjacency entry ({row}, {col}) = {value} is not in {{0, 1}}")]
    NonBinaryEntry { row: usize, col: usize, value: f64 },

    #[error("adjacency entry ({row}, {col}) = {value} is not finite")]
    NonFiniteEntry { row: usize, col: usize, value: f64 },

    #[error("feature matrix has {features} rows but the graph has {nodes} nodes")]
    RowCountMismatch { nodes: usize, features: usize },

    #[error("graph must have at least one node")]
    EmptyGraph,

    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("label {label} out of range for dimension {dim}")]
    LabelOutOfRange { label: usize, dim: usize },

    #[error("diffusion time must be nonnegative, got {0}")]
    NegativeTau(f64),

    #[error("feature dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("cost matrix contains a non-finite entry at ({0}, {1})")]
    NonFiniteCost(usize, usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("weight error: {0}")]
    WeightError(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("candidate set is empty")]
    EmptyCandidateSet,

    #[error("not enough training data: requested {requested}, available {available}")]
    InsufficientTrainingData { requested: usize, available: usize },

    #[error("value {value} out of range [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("unsupported document version {found} (expected {expected})")]
    SchemaVersionMismatch { found: u32, expected: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by malformed or inconsistent input data, as
    /// opposed to numerical breakdowns.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::NotPositiveDefinite(_) | Error::NonFiniteCost(..))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
