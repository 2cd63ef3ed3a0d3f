//! Tensor-product cubic B-spline deformations on a uniform knot grid.
//!
//! A deformation at level `N` has `n = 2^N` cells per direction and control
//! points indexed `-1..=n+1` in each direction; control point `i` is centred at
//! the knot `i H`. Only the displacement from the identity is stored.
//!
//! The Dirichlet condition `Φ = Id` on the boundary is built into the
//! representation: control displacements on the boundary knots vanish and the
//! ghost ring is the odd reflection of the first interior ring. The displacement
//! therefore has zero trace and zero second normal derivative on the boundary,
//! and the free unknowns are the `(n-1)^2` interior control displacements.

use super::{check_domain, locate, Point};
use crate::error::{Error, Result};
use crate::linalg::Mat2;

/// Second derivatives `h[i][j][k] = ∂_j ∂_k Φ^i`.
pub type Hessian = [[[f64; 2]; 2]; 2];

/// Value and derivatives up to third order of a spline deformation at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JetEvaluation {
    pub value: Point,
    /// `jacobian[i][k] = ∂_k Φ^i`.
    pub jacobian: Mat2,
    pub laplacian: Point,
    pub hessian: Hessian,
    /// `grad_laplacian[i][k] = ∂_k ΔΦ^i`.
    pub grad_laplacian: Mat2,
}

/// Uniform cubic B-spline segments and derivatives up to order three at local
/// coordinate `t`, scaled for a knot spacing `1/inv_h`.
#[inline]
fn basis_1d(t: f64, inv_h: f64) -> [[f64; 4]; 4] {
    let s = 1.0 - t;
    let t2 = t * t;
    let t3 = t2 * t;
    let h1 = inv_h;
    let h2 = h1 * h1;
    let h3 = h2 * h1;
    [
        [
            s * s * s / 6.0,
            (3.0 * t3 - 6.0 * t2 + 4.0) / 6.0,
            (-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0) / 6.0,
            t3 / 6.0,
        ],
        [
            -0.5 * s * s * h1,
            (1.5 * t2 - 2.0 * t) * h1,
            (-1.5 * t2 + t + 0.5) * h1,
            0.5 * t2 * h1,
        ],
        [s * h2, (3.0 * t - 2.0) * h2, (1.0 - 3.0 * t) * h2, t * h2],
        [-h3, 3.0 * h3, -3.0 * h3, h3],
    ]
}

/// The 4x4 active B-splines at a point together with their 1D derivatives.
///
/// `bx[d][a]` is the `d`-th derivative of the `a`-th active x-basis function;
/// active control indices along x are `cell_x - 1 + a` for `a in 0..4`.
#[derive(Debug, Clone, Copy)]
pub struct BasisStencil {
    pub cell_x: usize,
    pub cell_y: usize,
    pub bx: [[f64; 4]; 4],
    pub by: [[f64; 4]; 4],
}

impl BasisStencil {
    pub fn new(level: u32, x: Point) -> Self {
        let n = 1usize << level;
        let inv_h = n as f64;
        let (cx, tx) = locate(x[0], n);
        let (cy, ty) = locate(x[1], n);
        BasisStencil { cell_x: cx, cell_y: cy, bx: basis_1d(tx, inv_h), by: basis_1d(ty, inv_h) }
    }

    /// Value, gradient and Laplacian of the scalar B-spline `(a, b)`.
    #[inline]
    pub fn value_grad_lap(&self, a: usize, b: usize) -> (f64, Point, f64) {
        let (bx, by) = (&self.bx, &self.by);
        (
            bx[0][a] * by[0][b],
            [bx[1][a] * by[0][b], bx[0][a] * by[1][b]],
            bx[2][a] * by[0][b] + bx[0][a] * by[2][b],
        )
    }

    /// Array offset (into the ghost-inclusive control grid) of local control `(a, b)`.
    #[inline]
    pub fn full_index(&self, a: usize, b: usize, stride: usize) -> usize {
        (self.cell_y + b) * stride + self.cell_x + a
    }
}

/// Cubic B-spline deformation `Φ = Id + Σ d_ij B_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct Deformation {
    level: u32,
    /// Ghost-inclusive control displacements, `(n+3)^2` entries, row-major;
    /// control point `(i, j)` is stored at `(j+1)(n+3) + (i+1)`.
    ctrl: Vec<Point>,
}

/// Odd-reflection map of a 1D control index onto an interior index in `1..n`.
#[inline]
fn mirror_1d(i: isize, n: isize) -> Option<(isize, f64)> {
    if i == -1 {
        Some((1, -1.0))
    } else if i == n + 1 {
        Some((n - 1, -1.0))
    } else if i <= 0 || i >= n {
        None
    } else {
        Some((i, 1.0))
    }
}

impl Deformation {
    pub fn identity(level: u32) -> Self {
        let s = (1usize << level) + 3;
        Deformation { level, ctrl: vec![[0.0; 2]; s * s] }
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// Number of spline cells per side.
    pub fn cells(&self) -> usize {
        1 << self.level
    }

    pub fn mesh_size(&self) -> f64 {
        1.0 / self.cells() as f64
    }

    /// Side length of the ghost-inclusive control grid, `2^N + 3`.
    pub fn control_side(&self) -> usize {
        self.cells() + 3
    }

    /// Interior control points per side, `2^N - 1`.
    pub fn interior_side(level: u32) -> usize {
        (1usize << level) - 1
    }

    /// Number of scalar unknowns: two components per interior control point.
    pub fn num_dofs(level: u32) -> usize {
        let m = Self::interior_side(level);
        2 * m * m
    }

    /// Ghost-inclusive control displacements (row-major, see type docs).
    pub fn controls(&self) -> &[Point] {
        &self.ctrl
    }

    /// Builds a deformation from all control displacements, checking that they
    /// satisfy the boundary construction.
    pub fn from_controls(level: u32, ctrl: Vec<Point>) -> Result<Self> {
        let s = (1usize << level) + 3;
        if ctrl.len() != s * s {
            return Err(Error::LevelMismatch(format!(
                "{} control points do not match level {level}",
                ctrl.len()
            )));
        }
        let candidate = Deformation { level, ctrl };
        let rebuilt = Deformation::from_dofs(level, &candidate.dofs())?;
        let violation = candidate
            .ctrl
            .iter()
            .zip(&rebuilt.ctrl)
            .map(|(a, b)| (a[0] - b[0]).abs().max((a[1] - b[1]).abs()))
            .fold(0.0, f64::max);
        if violation > 1e-12 {
            return Err(Error::Format(format!(
                "control grid violates the boundary construction (deviation {violation:e})"
            )));
        }
        Ok(candidate)
    }

    /// Builds a deformation from interior unknowns laid out component-major:
    /// first all x-displacements, then all y-displacements, each in row-major
    /// order over interior control points `(1..n) x (1..n)`.
    pub fn from_dofs(level: u32, dofs: &[f64]) -> Result<Self> {
        if level == 0 {
            return Err(Error::InvalidArgument("spline level must be at least 1".into()));
        }
        let m = Self::interior_side(level);
        if dofs.len() != 2 * m * m {
            return Err(Error::LevelMismatch(format!(
                "{} unknowns do not match spline level {level} ({} expected)",
                dofs.len(),
                2 * m * m
            )));
        }
        let n = 1isize << level;
        let s = (n + 3) as usize;
        let mut ctrl = vec![[0.0; 2]; s * s];
        for j in -1..=n + 1 {
            for i in -1..=n + 1 {
                if let (Some((ri, si)), Some((rj, sj))) = (mirror_1d(i, n), mirror_1d(j, n)) {
                    let k = (rj - 1) as usize * m + (ri - 1) as usize;
                    let sign = si * sj;
                    ctrl[(j + 1) as usize * s + (i + 1) as usize] =
                        [sign * dofs[k], sign * dofs[m * m + k]];
                }
            }
        }
        Ok(Deformation { level, ctrl })
    }

    /// Interior unknowns in the layout of [`Deformation::from_dofs`].
    pub fn dofs(&self) -> Vec<f64> {
        let m = Self::interior_side(self.level);
        let s = self.control_side();
        let mut out = vec![0.0; 2 * m * m];
        for j in 0..m {
            for i in 0..m {
                let d = self.ctrl[(j + 2) * s + (i + 2)];
                out[j * m + i] = d[0];
                out[m * m + j * m + i] = d[1];
            }
        }
        out
    }

    /// For every ghost-inclusive control point, the interior scalar unknown it
    /// is tied to and the sign of the tie. Use `+ m*m` for the y-component.
    pub fn dof_map(level: u32) -> Vec<Option<(usize, f64)>> {
        let n = 1isize << level;
        let m = Self::interior_side(level);
        let mut map = Vec::with_capacity(((n + 3) * (n + 3)) as usize);
        for j in -1..=n + 1 {
            for i in -1..=n + 1 {
                map.push(match (mirror_1d(i, n), mirror_1d(j, n)) {
                    (Some((ri, si)), Some((rj, sj))) => {
                        Some(((rj - 1) as usize * m + (ri - 1) as usize, si * sj))
                    }
                    _ => None,
                });
            }
        }
        map
    }

    /// Sup-norm of the control displacements.
    pub fn max_displacement(&self) -> f64 {
        self.ctrl.iter().map(|d| d[0].abs().max(d[1].abs())).fold(0.0, f64::max)
    }

    /// Sup-norm of the difference of control displacements.
    pub fn max_control_diff(&self, other: &Deformation) -> f64 {
        assert_eq!(self.level, other.level);
        self.ctrl
            .iter()
            .zip(&other.ctrl)
            .map(|(a, b)| (a[0] - b[0]).abs().max((a[1] - b[1]).abs()))
            .fold(0.0, f64::max)
    }

    /// Deformation with displacement scaled by `s`.
    pub fn scaled(&self, s: f64) -> Deformation {
        Deformation {
            level: self.level,
            ctrl: self.ctrl.iter().map(|d| [s * d[0], s * d[1]]).collect(),
        }
    }

    #[inline]
    pub(crate) fn stencil(&self, x: Point) -> BasisStencil {
        BasisStencil::new(self.level, x)
    }

    /// `Φ(x)` for `x` in the closed unit square (not checked).
    #[inline]
    pub(crate) fn value_unchecked(&self, x: Point) -> Point {
        let st = self.stencil(x);
        let s = self.control_side();
        let mut v = [0.0; 2];
        for b in 0..4 {
            let mut row = [0.0; 2];
            let base = st.full_index(0, b, s);
            for a in 0..4 {
                let d = self.ctrl[base + a];
                row[0] += st.bx[0][a] * d[0];
                row[1] += st.bx[0][a] * d[1];
            }
            v[0] += st.by[0][b] * row[0];
            v[1] += st.by[0][b] * row[1];
        }
        [x[0] + v[0], x[1] + v[1]]
    }

    /// `Φ(x)` and `DΦ(x)` for `x` in the closed unit square (not checked).
    #[inline]
    pub(crate) fn value_jacobian_unchecked(&self, x: Point) -> (Point, Mat2) {
        let st = self.stencil(x);
        let s = self.control_side();
        let mut v = [0.0; 2];
        let mut dx = [0.0; 2];
        let mut dy = [0.0; 2];
        for b in 0..4 {
            let base = st.full_index(0, b, s);
            for a in 0..4 {
                let d = self.ctrl[base + a];
                let w0 = st.bx[0][a] * st.by[0][b];
                let wx = st.bx[1][a] * st.by[0][b];
                let wy = st.bx[0][a] * st.by[1][b];
                for c in 0..2 {
                    v[c] += w0 * d[c];
                    dx[c] += wx * d[c];
                    dy[c] += wy * d[c];
                }
            }
        }
        (
            [x[0] + v[0], x[1] + v[1]],
            Mat2::new([[1.0 + dx[0], dy[0]], [dx[1], 1.0 + dy[1]]]),
        )
    }

    /// Full jet at a point in the closed unit square (not checked).
    pub(crate) fn jet_unchecked(&self, x: Point) -> JetEvaluation {
        let st = self.stencil(x);
        let s = self.control_side();
        // acc[q][c] for the ten partial derivatives in the order
        // 1, x, y, xx, xy, yy, xxx, xxy, xyy, yyy.
        const ORDERS: [(usize, usize); 10] =
            [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (1, 2), (0, 3)];
        let mut acc = [[0.0f64; 2]; 10];
        for b in 0..4 {
            let base = st.full_index(0, b, s);
            for a in 0..4 {
                let d = self.ctrl[base + a];
                for (q, &(ox, oy)) in ORDERS.iter().enumerate() {
                    let w = st.bx[ox][a] * st.by[oy][b];
                    acc[q][0] += w * d[0];
                    acc[q][1] += w * d[1];
                }
            }
        }
        let mut hessian = [[[0.0; 2]; 2]; 2];
        let mut laplacian = [0.0; 2];
        let mut gl = [[0.0; 2]; 2];
        for c in 0..2 {
            hessian[c] = [[acc[3][c], acc[4][c]], [acc[4][c], acc[5][c]]];
            laplacian[c] = acc[3][c] + acc[5][c];
            gl[c] = [acc[6][c] + acc[8][c], acc[7][c] + acc[9][c]];
        }
        JetEvaluation {
            value: [x[0] + acc[0][0], x[1] + acc[0][1]],
            jacobian: Mat2::new([[1.0 + acc[1][0], acc[2][0]], [acc[1][1], 1.0 + acc[2][1]]]),
            laplacian,
            hessian,
            grad_laplacian: Mat2::new(gl),
        }
    }

    pub fn eval(&self, x: Point) -> Result<Point> {
        check_domain(x)?;
        Ok(self.value_unchecked(x))
    }

    pub fn jacobian(&self, x: Point) -> Result<Mat2> {
        check_domain(x)?;
        Ok(self.value_jacobian_unchecked(x).1)
    }

    pub fn jet(&self, x: Point) -> Result<JetEvaluation> {
        eval_spline_jet(self, x)
    }

    /// Spline whose values at the interior spline knots `(i H, j H)` equal the
    /// given displacements. `nodal` holds `(n+1)^2` displacements in row-major
    /// node order; boundary entries are ignored (the boundary trace is zero).
    pub fn interpolate_nodal_displacements(level: u32, nodal: &[Point]) -> Result<Self> {
        let n = 1usize << level;
        if nodal.len() != (n + 1) * (n + 1) {
            return Err(Error::LevelMismatch("nodal data size".into()));
        }
        let m = n - 1;
        let mut dofs = vec![0.0; 2 * m * m];
        for c in 0..2 {
            let mut grid: Vec<f64> = (0..m * m)
                .map(|k| nodal[(k / m + 1) * (n + 1) + (k % m + 1)][c])
                .collect();
            // Collocation matrix along each axis is tridiag(1, 4, 1) / 6.
            let mut line = vec![0.0; m];
            for j in 0..m {
                line.copy_from_slice(&grid[j * m..(j + 1) * m]);
                solve_collocation(&mut line);
                grid[j * m..(j + 1) * m].copy_from_slice(&line);
            }
            for i in 0..m {
                for j in 0..m {
                    line[j] = grid[j * m + i];
                }
                solve_collocation(&mut line);
                for j in 0..m {
                    grid[j * m + i] = line[j];
                }
            }
            dofs[c * m * m..(c + 1) * m * m].copy_from_slice(&grid);
        }
        Deformation::from_dofs(level, &dofs)
    }
}

/// Thomas algorithm for `tridiag(1/6, 4/6, 1/6) x = rhs`, in place.
fn solve_collocation(rhs: &mut [f64]) {
    let m = rhs.len();
    if m == 0 {
        return;
    }
    let (a, b) = (1.0 / 6.0, 4.0 / 6.0);
    let mut c_prime = vec![0.0; m];
    c_prime[0] = a / b;
    rhs[0] /= b;
    for i in 1..m {
        let denom = b - a * c_prime[i - 1];
        c_prime[i] = a / denom;
        rhs[i] = (rhs[i] - a * rhs[i - 1]) / denom;
    }
    for i in (0..m - 1).rev() {
        rhs[i] -= c_prime[i] * rhs[i + 1];
    }
}

/// Value, Jacobian, Hessian, Laplacian and gradient of the Laplacian of the
/// spline map at `x`, computed exactly from the B-spline representation.
pub fn eval_spline_jet(d: &Deformation, x: Point) -> Result<JetEvaluation> {
    check_domain(x)?;
    Ok(d.jet_unchecked(x))
}

/// Knot-insertion refinement to the next level; the represented map is unchanged.
pub fn prolong_deformation(d: &Deformation) -> Deformation {
    let n = d.cells();
    let s = n + 3;
    let fs = 2 * n + 3;
    // Refine along x: fine index f = -1..=2n+1 stored at f+1.
    let refine = |c: &dyn Fn(isize) -> Point, f: isize| -> Point {
        let lerp = |w: [f64; 3], p: [Point; 3]| -> Point {
            [
                w[0] * p[0][0] + w[1] * p[1][0] + w[2] * p[2][0],
                w[0] * p[0][1] + w[1] * p[1][1] + w[2] * p[2][1],
            ]
        };
        if f.rem_euclid(2) == 0 {
            let i = f / 2;
            lerp([0.125, 0.75, 0.125], [c(i - 1), c(i), c(i + 1)])
        } else {
            let i = (f - 1) / 2;
            lerp([0.5, 0.5, 0.0], [c(i), c(i + 1), [0.0; 2]])
        }
    };
    let mut half = vec![[0.0; 2]; fs * s];
    for j in 0..s {
        let row = |i: isize| d.ctrl[j * s + (i + 1) as usize];
        for f in -1..=(2 * n as isize + 1) {
            half[j * fs + (f + 1) as usize] = refine(&row, f);
        }
    }
    let mut ctrl = vec![[0.0; 2]; fs * fs];
    for i in 0..fs {
        let col = |j: isize| half[(j + 1) as usize * fs + i];
        for f in -1..=(2 * n as isize + 1) {
            ctrl[(f + 1) as usize * fs + i] = refine(&col, f);
        }
    }
    Deformation { level: d.level + 1, ctrl }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_deformation(level: u32, amplitude: f64, seed: u64) -> Deformation {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dofs: Vec<f64> = (0..Deformation::num_dofs(level))
            .map(|_| amplitude * (2.0 * rng.gen::<f64>() - 1.0))
            .collect();
        Deformation::from_dofs(level, &dofs).unwrap()
    }

    #[test]
    fn identity_jet() {
        let d = Deformation::identity(3);
        let j = eval_spline_jet(&d, [0.3, 0.8]).unwrap();
        assert_eq!(j.value, [0.3, 0.8]);
        assert_eq!(j.jacobian, Mat2::identity());
        assert_eq!(j.laplacian, [0.0; 2]);
        assert_eq!(j.hessian, [[[0.0; 2]; 2]; 2]);
        assert_eq!(j.grad_laplacian, Mat2::zero());
    }

    #[test]
    fn constant_controls_give_translation() {
        // Partition of unity: a constant control field shifts the map.
        let level = 3;
        let s = (1usize << level) + 3;
        let d = Deformation { level, ctrl: vec![[0.02, -0.01]; s * s] };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let x = [rng.gen::<f64>(), rng.gen::<f64>()];
            let j = d.jet_unchecked(x);
            assert!((j.value[0] - x[0] - 0.02).abs() < 1e-14);
            assert!((j.value[1] - x[1] + 0.01).abs() < 1e-14);
            let dj = j.jacobian.sub(&Mat2::identity());
            assert!(dj.max_abs() < 1e-12);
            assert!(j.laplacian.iter().all(|v| v.abs() < 1e-9));
            assert!(j.grad_laplacian.max_abs() < 1e-7);
        }
    }

    #[test]
    fn jet_matches_finite_differences() {
        let d = random_deformation(3, 0.01, 42);
        let x = [0.37, 0.61];
        let h = 1e-5;
        let jet = eval_spline_jet(&d, x).unwrap();
        let shift = |dx: f64, dy: f64| d.jet_unchecked([x[0] + dx, x[1] + dy]);
        for c in 0..2 {
            // Jacobian from values.
            let fd_x = (shift(h, 0.0).value[c] - shift(-h, 0.0).value[c]) / (2.0 * h);
            let fd_y = (shift(0.0, h).value[c] - shift(0.0, -h).value[c]) / (2.0 * h);
            let jx = jet.jacobian.m[c][0];
            let jy = jet.jacobian.m[c][1];
            assert!((fd_x - jx).abs() / jx.abs().max(1.0) < 1e-6, "{fd_x} {jx}");
            assert!((fd_y - jy).abs() / jy.abs().max(1.0) < 1e-6);
            // Hessian from Jacobians.
            for k in 0..2 {
                let fd = [
                    (shift(h, 0.0).jacobian.m[c][k] - shift(-h, 0.0).jacobian.m[c][k]) / (2.0 * h),
                    (shift(0.0, h).jacobian.m[c][k] - shift(0.0, -h).jacobian.m[c][k]) / (2.0 * h),
                ];
                for j in 0..2 {
                    let an = jet.hessian[c][j][k];
                    assert!((fd[j] - an).abs() / an.abs().max(1.0) < 1e-6, "{} {}", fd[j], an);
                }
            }
            // Gradient of the Laplacian from Laplacians.
            let fd = [
                (shift(h, 0.0).laplacian[c] - shift(-h, 0.0).laplacian[c]) / (2.0 * h),
                (shift(0.0, h).laplacian[c] - shift(0.0, -h).laplacian[c]) / (2.0 * h),
            ];
            for k in 0..2 {
                let an = jet.grad_laplacian.m[c][k];
                assert!((fd[k] - an).abs() / an.abs().max(1.0) < 1e-6, "{} {}", fd[k], an);
            }
            assert!((jet.laplacian[c] - jet.hessian[c][0][0] - jet.hessian[c][1][1]).abs() < 1e-12);
            assert_eq!(jet.hessian[c][0][1], jet.hessian[c][1][0]);
        }
    }

    #[test]
    fn boundary_trace_is_identity() {
        let d = random_deformation(4, 0.05, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut worst: f64 = 0.0;
        for k in 0..1000 {
            let t = rng.gen::<f64>();
            let x = match k % 4 {
                0 => [0.0, t],
                1 => [1.0, t],
                2 => [t, 0.0],
                _ => [t, 1.0],
            };
            let v = d.eval(x).unwrap();
            worst = worst.max((v[0] - x[0]).abs()).max((v[1] - x[1]).abs());
        }
        assert!(worst < 1e-12, "{worst}");
    }

    #[test]
    fn dofs_round_trip() {
        let d = random_deformation(3, 0.1, 4);
        let back = Deformation::from_dofs(3, &d.dofs()).unwrap();
        assert_eq!(d, back);
        assert!(Deformation::from_controls(3, d.controls().to_vec()).is_ok());
        let mut bad = d.controls().to_vec();
        bad[0][0] += 1.0;
        assert!(Deformation::from_controls(3, bad).is_err());
    }

    #[test]
    fn prolongation_preserves_the_map() {
        let d = random_deformation(3, 0.02, 17);
        let f = prolong_deformation(&d);
        assert_eq!(f.level(), 4);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let x = [rng.gen::<f64>(), rng.gen::<f64>()];
            let (a, b) = (d.eval(x).unwrap(), f.eval(x).unwrap());
            worst = worst.max((a[0] - b[0]).abs()).max((a[1] - b[1]).abs());
        }
        assert!(worst < 1e-12, "{worst}");
        // The refined controls still satisfy the boundary construction.
        assert!(Deformation::from_controls(4, f.controls().to_vec()).is_ok());
    }

    #[test]
    fn nodal_interpolation_hits_the_data() {
        let level = 3;
        let n = 8usize;
        let h = 1.0 / n as f64;
        let field = |x: f64, y: f64| {
            let b = (std::f64::consts::PI * x).sin() * (std::f64::consts::PI * y).sin();
            [0.01 * b, -0.02 * b * x]
        };
        let nodal: Vec<Point> = (0..(n + 1) * (n + 1))
            .map(|k| field((k % (n + 1)) as f64 * h, (k / (n + 1)) as f64 * h))
            .collect();
        let d = Deformation::interpolate_nodal_displacements(level, &nodal).unwrap();
        for j in 0..=n {
            for i in 0..=n {
                let x = [i as f64 * h, j as f64 * h];
                let v = d.eval(x).unwrap();
                let f = field(x[0], x[1]);
                assert!((v[0] - x[0] - f[0]).abs() < 1e-14);
                assert!((v[1] - x[1] - f[1]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn out_of_domain_jet_is_an_error() {
        let d = Deformation::identity(2);
        assert!(matches!(eval_spline_jet(&d, [-0.1, 0.5]), Err(Error::Domain(..))));
    }
}
