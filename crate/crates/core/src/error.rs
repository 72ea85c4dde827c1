use thiserror::Error;

/// Errors raised by the model-construction and solver layers.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid region: {0}")]
    InvalidRegion(String),

    #[error("region specification parse error at byte {position}: {message}")]
    RegionSyntax { position: usize, message: String },

    #[error("projection did not converge after {sweeps} sweeps (residual {residual:e})")]
    ProjectionNotConverged { sweeps: usize, residual: f64 },

    #[error("feasible set is empty near the requested ball")]
    EmptyIntersection,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate geometry: design matrix has rank {rank} < {required}")]
    DegenerateGeometry { rank: usize, required: usize },

    #[error("singular geometry: interpolation system is numerically singular ({0})")]
    SingularGeometry(String),

    #[error("point {x:?} is infeasible")]
    Infeasible { x: Vec<f64> },

    #[error("region too thin for invertible geometry: best |lagrange value| {best:e} for point {index}")]
    RegionTooThin { index: usize, best: f64 },

    #[error("poisedness improvement exceeded {cap} swaps")]
    SwapCapExceeded { cap: usize, swaps: Vec<crate::poisedness::SwapRecord> },

    #[error("objective returned a non-finite value at {x:?}")]
    NonFiniteObjective { x: Vec<f64> },

    #[error("serialization error: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}
