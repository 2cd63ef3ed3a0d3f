//! Uniform grids on the unit square: bilinear finite element images, cubic
//! B-spline deformations and Gauss quadrature.

mod image;
mod quadrature;
mod spline;

pub use image::{prolong_image, restrict_image, Image};
pub use quadrature::{build_quadrature, QuadratureRule};
pub use spline::{
    eval_spline_jet, prolong_deformation, BasisStencil, Deformation, Hessian, JetEvaluation,
};

use crate::error::{Error, Result};

/// A point `(x, y)` of the unit square.
pub type Point = [f64; 2];

/// Refinement levels of the two nested meshes.
///
/// The spline mesh has size `2^-spline_level`, the image mesh `2^-image_level`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    pub spline_level: u32,
    pub image_level: u32,
}

impl GridSpec {
    pub fn new(spline_level: u32, image_level: u32) -> Result<Self> {
        if image_level <= spline_level {
            return Err(Error::LevelMismatch(format!(
                "image level {image_level} must exceed spline level {spline_level}"
            )));
        }
        Ok(GridSpec { spline_level, image_level })
    }

    /// Image level one above the spline level.
    pub fn with_spline_level(spline_level: u32) -> Self {
        GridSpec { spline_level, image_level: spline_level + 1 }
    }
}

pub(crate) fn check_domain(x: Point) -> Result<()> {
    if (0.0..=1.0).contains(&x[0]) && (0.0..=1.0).contains(&x[1]) {
        Ok(())
    } else {
        Err(Error::Domain(x[0], x[1]))
    }
}

/// Clamps a point to the closed unit square. Returns whether it moved.
pub(crate) fn clamp_to_domain(x: Point) -> (Point, bool) {
    let c = [x[0].clamp(0.0, 1.0), x[1].clamp(0.0, 1.0)];
    (c, c != x)
}

/// Cell index and local coordinate for `t` in `[0,1]` on a mesh with `n` cells.
/// Points on an interior edge belong to the cell on the upper side (`floor`).
#[inline]
pub(crate) fn locate(t: f64, n: usize) -> (usize, f64) {
    let s = t * n as f64;
    let c = (s.floor() as isize).clamp(0, n as isize - 1) as usize;
    (c, s - c as f64)
}

/// Like [`locate`], but points on an interior edge belong to the lower cell.
#[inline]
pub(crate) fn locate_lower(t: f64, n: usize) -> (usize, f64) {
    let s = t * n as f64;
    let c = (s.ceil() as isize - 1).clamp(0, n as isize - 1) as usize;
    (c, s - c as f64)
}
