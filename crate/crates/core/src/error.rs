use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("axis {axis} out of range for a {dim}-dimensional grid")]
    AxisOutOfRange { axis: usize, dim: usize },

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value {value} at {context}")]
    NonFinite { context: String, value: f64 },

    #[error("empty sample set")]
    EmptySampleSet,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("eigensolver failed: {0}")]
    Eigensolve(String),

    #[error("singular pencil: {0}")]
    SingularPencil(String),

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("contraction violated: ||P(t)||_2 = {norm} at t = {time}")]
    ContractionViolated { time: f64, norm: f64 },

    #[error("step size {dt} exceeds stability bound (dt * ||L|| = {product:.3} > 1)")]
    StepTooLarge { dt: f64, product: f64 },

    #[error("integration diverged: {0}")]
    Diverged(String),

    #[error("dimension cap exceeded: {0}")]
    DimensionCap(String),

    #[error("boundary contamination: {0}")]
    BoundaryContamination(String),

    #[error("malformed matrix market data: {0}")]
    MatrixMarket(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
