use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no quadrature rule of exactness {requested} (highest available is {available})")]
    QuadratureUnavailable { requested: usize, available: usize },

    #[error("triangle index {index} out of range (mesh has {count} triangles)")]
    TriangleOutOfRange { index: usize, count: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not positive definite (pivot {pivot:e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("matrix is singular to working precision at row {row}")]
    Singular { row: usize },

    #[error("{method} did not converge after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence {
        method: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("solve residual {residual:e} exceeds tolerance {tolerance:e}")]
    InaccurateSolve { residual: f64, tolerance: f64 },

    #[error("data f = {value:e} is not positive at ({x}, {y})")]
    NonPositiveData { x: f64, y: f64, value: f64 },

    #[error("iterate is not discretely convex: smallest cofactor eigenvalue {min_eigenvalue:e} at ({x}, {y})")]
    NotConvex { x: f64, y: f64, min_eigenvalue: f64 },

    #[error("reduced Newton Jacobian is singular: {0}")]
    SingularJacobian(String),

    #[error("time marching diverged at iteration {iteration} (increment {increment:e})")]
    Diverged { iteration: usize, increment: f64 },

    #[error("expression error: {0}")]
    Expression(String),

    #[error("function evaluation failed at ({x}, {y}): {reason}")]
    Evaluation { x: f64, y: f64, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
