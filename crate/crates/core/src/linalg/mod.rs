//! Small dense 2x2 algebra and sparse symmetric positive definite solvers.

mod mat2;
mod sparse;
mod solve;

pub use mat2::{cof2, det2, inv2, Mat2, SINGULAR_THRESHOLD};
pub use solve::{conjugate_gradient, matrix_free_cg, solve_spd, SkylineCholesky, SpdSolver, RESIDUAL_TOLERANCE};
pub use sparse::{SparseSymmetricMatrix, TripletBuilder};

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}
