use super::{check_domain, locate_lower, Point};
use crate::error::{Error, Result};

/// Piecewise bilinear, globally continuous function on the unit square.
///
/// Nodal values live on the `(2^level + 1)^2` vertices of the uniform mesh,
/// stored row by row: node `(i, j)` at `(i h, j h)` has index `j (2^level+1) + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    level: u32,
    values: Vec<f64>,
}

impl Image {
    pub fn new(level: u32, values: Vec<f64>) -> Result<Self> {
        let side = (1usize << level) + 1;
        if values.len() != side * side {
            return Err(Error::LevelMismatch(format!(
                "{} nodal values do not match level {level} ({} expected)",
                values.len(),
                side * side
            )));
        }
        Ok(Image { level, values })
    }

    pub fn constant(level: u32, c: f64) -> Self {
        let side = (1usize << level) + 1;
        Image { level, values: vec![c; side * side] }
    }

    /// Samples `f` at the mesh nodes.
    pub fn from_fn<F: FnMut(Point) -> f64>(level: u32, mut f: F) -> Self {
        let n = 1usize << level;
        let h = 1.0 / n as f64;
        let mut values = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                values.push(f([i as f64 * h, j as f64 * h]));
            }
        }
        Image { level, values }
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// Number of cells per side.
    pub fn cells(&self) -> usize {
        1 << self.level
    }

    /// Number of nodes per side.
    pub fn side(&self) -> usize {
        (1 << self.level) + 1
    }

    pub fn mesh_size(&self) -> f64 {
        1.0 / self.cells() as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.side() + i]
    }

    pub fn node_position(&self, i: usize, j: usize) -> Point {
        let h = self.mesh_size();
        [i as f64 * h, j as f64 * h]
    }

    /// Applies `f(node position, value)` to every node.
    pub fn map_nodes<F: FnMut(Point, f64) -> f64>(&self, mut f: F) -> Image {
        let side = self.side();
        let h = self.mesh_size();
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(k, &v)| f([(k % side) as f64 * h, (k / side) as f64 * h], v))
            .collect();
        Image { level: self.level, values }
    }

    /// Pointwise combination of two images of the same level.
    pub fn zip_with<F: FnMut(f64, f64) -> f64>(&self, other: &Image, mut f: F) -> Result<Image> {
        self.check_same_level(other)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Image { level: self.level, values })
    }

    pub(crate) fn check_same_level(&self, other: &Image) -> Result<()> {
        if self.level != other.level {
            return Err(Error::LevelMismatch(format!(
                "images at levels {} and {}",
                self.level, other.level
            )));
        }
        Ok(())
    }

    #[inline]
    fn cell_of(&self, x: Point) -> (usize, usize, f64, f64) {
        let n = self.cells();
        let (ci, s) = locate_lower(x[0], n);
        let (cj, t) = locate_lower(x[1], n);
        (ci, cj, s, t)
    }

    /// Value at a point already known to lie in the closed unit square.
    #[inline]
    pub(crate) fn eval_unchecked(&self, x: Point) -> f64 {
        let (ci, cj, s, t) = self.cell_of(x);
        let side = self.side();
        let k = cj * side + ci;
        let v00 = self.values[k];
        let v10 = self.values[k + 1];
        let v01 = self.values[k + side];
        let v11 = self.values[k + side + 1];
        (1.0 - t) * ((1.0 - s) * v00 + s * v10) + t * ((1.0 - s) * v01 + s * v11)
    }

    /// Cellwise gradient at a point already known to lie in the closed unit square.
    #[inline]
    pub(crate) fn grad_unchecked(&self, x: Point) -> Point {
        let (ci, cj, s, t) = self.cell_of(x);
        let side = self.side();
        let k = cj * side + ci;
        let v00 = self.values[k];
        let v10 = self.values[k + 1];
        let v01 = self.values[k + side];
        let v11 = self.values[k + side + 1];
        let inv_h = self.cells() as f64;
        [
            ((1.0 - t) * (v10 - v00) + t * (v11 - v01)) * inv_h,
            ((1.0 - s) * (v01 - v00) + s * (v11 - v10)) * inv_h,
        ]
    }

    /// Bilinear interpolation within the containing cell.
    pub fn eval(&self, x: Point) -> Result<f64> {
        check_domain(x)?;
        Ok(self.eval_unchecked(x))
    }

    /// Cellwise gradient. On cell edges the cell to the lower left of `x` is used,
    /// except on the left and bottom boundary where the adjacent cell is used.
    pub fn eval_grad(&self, x: Point) -> Result<Point> {
        check_domain(x)?;
        Ok(self.grad_unchecked(x))
    }

    /// Discrete L2 norm computed with the mass matrix of the bilinear elements.
    pub fn l2_norm(&self) -> f64 {
        self.l2_inner(self).sqrt()
    }

    /// L2 inner product of two bilinear functions (exact).
    pub fn l2_inner(&self, other: &Image) -> f64 {
        assert_eq!(self.level, other.level);
        let n = self.cells();
        let side = self.side();
        let h2 = self.mesh_size() * self.mesh_size();
        // Element mass matrix of Q1 on a square of unit area, nodes ordered
        // (0,0), (1,0), (0,1), (1,1).
        const MASS: [[f64; 4]; 4] = [
            [4.0, 2.0, 2.0, 1.0],
            [2.0, 4.0, 1.0, 2.0],
            [2.0, 1.0, 4.0, 2.0],
            [1.0, 2.0, 2.0, 4.0],
        ];
        let mut acc = 0.0;
        for cj in 0..n {
            for ci in 0..n {
                let k = cj * side + ci;
                let idx = [k, k + 1, k + side, k + side + 1];
                for a in 0..4 {
                    for b in 0..4 {
                        acc += MASS[a][b] * self.values[idx[a]] * other.values[idx[b]];
                    }
                }
            }
        }
        acc * h2 / 36.0
    }

    pub fn max_abs_diff(&self, other: &Image) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Refines an image by one level. The represented function is unchanged.
pub fn prolong_image(u: &Image) -> Image {
    let n = u.cells();
    let fine_side = 2 * n + 1;
    let mut values = vec![0.0; fine_side * fine_side];
    for j in 0..fine_side {
        for i in 0..fine_side {
            let (ci, cj) = (i / 2, j / 2);
            values[j * fine_side + i] = match (i % 2, j % 2) {
                (0, 0) => u.node(ci, cj),
                (1, 0) => 0.5 * (u.node(ci, cj) + u.node(ci + 1, cj)),
                (0, 1) => 0.5 * (u.node(ci, cj) + u.node(ci, cj + 1)),
                _ => {
                    0.25 * (u.node(ci, cj)
                        + u.node(ci + 1, cj)
                        + u.node(ci, cj + 1)
                        + u.node(ci + 1, cj + 1))
                }
            };
        }
    }
    Image { level: u.level + 1, values }
}

/// Full-weighting restriction to the next coarser level, with mirrored values
/// outside the domain.
pub fn restrict_image(u: &Image) -> Result<Image> {
    if u.level == 0 {
        return Err(Error::InvalidArgument("cannot restrict a level-0 image".into()));
    }
    let fine_n = u.cells() as isize;
    let coarse_side = (u.cells() / 2) + 1;
    let mirror = |k: isize| -> usize {
        if k < 0 {
            (-k) as usize
        } else if k > fine_n {
            (2 * fine_n - k) as usize
        } else {
            k as usize
        }
    };
    const W: [f64; 3] = [1.0, 2.0, 1.0];
    let mut values = Vec::with_capacity(coarse_side * coarse_side);
    for cj in 0..coarse_side as isize {
        for ci in 0..coarse_side as isize {
            let mut acc = 0.0;
            for (dj, wj) in (-1..=1).zip(W) {
                for (di, wi) in (-1..=1).zip(W) {
                    acc += wi * wj * u.node(mirror(2 * ci + di), mirror(2 * cj + dj));
                }
            }
            values.push(acc / 16.0);
        }
    }
    Ok(Image { level: u.level - 1, values })
}
