//! Discrete geodesic shooting in the metamorphosis model of image space.
//!
//! Images are bilinear finite element functions on a fine uniform mesh of the
//! unit square; deformations are cubic B-splines on a coarser mesh. Given two
//! nearby images, [`shooting::exp_k`] extrapolates a discrete geodesic by
//! repeatedly solving the optimality system of the two-segment matching problem.

pub mod cli_io;
pub mod energy;
pub mod error;
pub mod filtering;
pub mod grid;
pub mod interpolation;
pub mod linalg;
pub mod registration;
pub mod shooting;
pub mod synthetic;

pub use error::{Error, Result};
