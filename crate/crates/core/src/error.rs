use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("finite element spaces live on different meshes")]
    MeshMismatch,

    #[error("no quadrature rule of degree {0} is available")]
    UnsupportedQuadrature(usize),

    #[error("cell {0} is degenerate (zero area)")]
    DegenerateCell(usize),

    #[error("point ({}, {}) lies outside the mesh", .0[0], .0[1])]
    PointOutside([f64; 2]),

    #[error("penalty parameter alpha = {0} is below 1; coercivity is not guaranteed")]
    PenaltyTooSmall(f64),

    #[error("input must have zero mean, got mean integral {0:e}")]
    NonZeroMean(f64),

    #[error("meshes are not nested: {0}")]
    NonNested(String),

    #[error("linear solve failed: {0}")]
    LinearSolveFailed(String),

    #[error("Newton iteration did not converge after {iterations} iterations (residuals: {history:?})")]
    NewtonDiverged { iterations: usize, history: Vec<f64> },

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Strip step context to reach the underlying failure.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtStep { source, .. } => source.root(),
            other => other,
        }
    }
}
