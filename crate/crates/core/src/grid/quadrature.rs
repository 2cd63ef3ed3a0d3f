//! Tensor-product Gauss–Legendre quadrature on uniform meshes of the unit square.

use super::Point;

/// Gauss–Legendre nodes on [0, 1] with three points, exact up to degree 5.
const GAUSS_NODES: [f64; 3] = [
    0.5 - 0.387_298_334_620_741_7, // sqrt(3/5) / 2
    0.5,
    0.5 + 0.387_298_334_620_741_7,
];
const GAUSS_WEIGHTS: [f64; 3] = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];

/// Per-cell quadrature rule mapped onto the uniform mesh of a given level.
///
/// The mesh has `2^level` cells per direction with side `2^-level`. Every cell
/// uses the same 3x3 reference rule; weights are scaled by the cell area.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    level: u32,
    cells_per_side: usize,
    cell_size: f64,
    /// Reference points in [0,1]^2 and weights summing to one.
    reference: [(Point, f64); 9],
}

impl QuadratureRule {
    pub fn new(level: u32) -> Self {
        let mut reference = [([0.0; 2], 0.0); 9];
        for (j, (&yj, &wj)) in GAUSS_NODES.iter().zip(&GAUSS_WEIGHTS).enumerate() {
            for (i, (&xi, &wi)) in GAUSS_NODES.iter().zip(&GAUSS_WEIGHTS).enumerate() {
                reference[3 * j + i] = ([xi, yj], wi * wj);
            }
        }
        let cells_per_side = 1usize << level;
        QuadratureRule {
            level,
            cells_per_side,
            cell_size: 1.0 / cells_per_side as f64,
            reference,
        }
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn cells_per_side(&self) -> usize {
        self.cells_per_side
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn points_per_cell(&self) -> usize {
        self.reference.len()
    }

    pub fn num_points(&self) -> usize {
        self.cells_per_side * self.cells_per_side * self.reference.len()
    }

    /// Weighted points of cell `(ci, cj)` (`ci` along x, `cj` along y).
    pub fn cell_points(&self, ci: usize, cj: usize) -> impl Iterator<Item = (f64, Point)> + '_ {
        let h = self.cell_size;
        let area = h * h;
        let (x0, y0) = (ci as f64 * h, cj as f64 * h);
        self.reference
            .iter()
            .map(move |&([s, t], w)| (w * area, [x0 + s * h, y0 + t * h]))
    }

    /// All weighted points, cell by cell in row-major cell order. The order is
    /// fixed so that reductions over it are reproducible.
    pub fn points(&self) -> impl Iterator<Item = (f64, Point)> + '_ {
        let n = self.cells_per_side;
        (0..n).flat_map(move |cj| (0..n).flat_map(move |ci| self.cell_points(ci, cj)))
    }

    /// Integral of `f` over the unit square.
    pub fn integrate<F: FnMut(Point) -> f64>(&self, mut f: F) -> f64 {
        self.points().map(|(w, x)| w * f(x)).sum()
    }
}

/// Builds the quadrature rule of the uniform mesh at `level`.
pub fn build_quadrature(level: u32) -> QuadratureRule {
    QuadratureRule::new(level)
}
