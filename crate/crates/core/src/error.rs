use thiserror::Error;

/// Errors produced by the metamorphosis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point ({0}, {1}) lies outside the unit square")]
    Domain(f64, f64),

    #[error("level mismatch: {0}")]
    LevelMismatch(String),

    #[error("singular 2x2 matrix (det = {0:e})")]
    Singular(f64),

    #[error("matrix is not positive definite at index {index} (pivot {pivot:e})")]
    NotSpd { index: usize, pivot: f64 },

    #[error("conjugate gradients stalled after {iterations} iterations (relative residual {residual:e})")]
    SolverStalled { iterations: usize, residual: f64 },

    #[error("degenerate deformation: det = {det:e} at ({x}, {y})")]
    DegenerateDeformation { det: f64, x: f64, y: f64 },

    #[error("deformation inversion failed: no deformed cell covers ({0}, {1})")]
    Inversion(f64, f64),

    #[error("fixed point iteration did not converge after {iterations} iterations (last difference {difference:e})")]
    NonConvergence { iterations: usize, difference: f64 },

    #[error("image is {width}x{height}; expected a square of side 2^M+1 (nearest valid size {nearest})")]
    Dimension { width: u32, height: u32, nearest: u32 },

    #[error("unsupported or malformed file: {0}")]
    Format(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
