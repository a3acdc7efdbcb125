use thiserror::Error;

/// Errors reported by the decomposition library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("argument outside kernel domain: {0}")]
    Domain(String),

    #[error("functional refers to grid index {index} but the grid has {size} points")]
    SupportMismatch { index: usize, size: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate pivot at index {0}: diagonal entry is not positive")]
    DegeneratePivot(usize),

    #[error("index {requested} out of range ({available} available)")]
    OutOfRange { requested: usize, available: usize },

    #[error("matrix is not positive semidefinite: {0}")]
    NotPsd(String),

    #[error("quadrature weights must be strictly positive")]
    NonPositiveWeights,

    #[error("sample batch too small: need at least {need} samples, got {got}")]
    DegenerateBatch { need: usize, got: usize },

    #[error("decomposition file carries no residual matrix")]
    MissingResidual,

    #[error("decompositions were built from different sources")]
    SourceMismatch,

    #[error("grid is not dyadic: {0}")]
    NotDyadic(String),

    #[error("invalid decomposition data: {0}")]
    InvalidDecomposition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
