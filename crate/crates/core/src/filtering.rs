//! One implicit step of Perona–Malik type diffusion on bilinear images.
//!
//! The smoothed image `x` solves `(M + τ S[J, λ]) x = M J`, where `M` is the
//! mass matrix and `S` the stiffness matrix weighted by the edge-stopping
//! factor `(1 + |∇J|²/λ²)⁻¹` evaluated at the quadrature points.

use crate::error::{Error, Result};
use crate::grid::{Image, QuadratureRule};
use crate::linalg::{SparseSymmetricMatrix, SpdSolver, TripletBuilder};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterParams {
    pub tau: f64,
    pub lambda: f64,
}

impl FilterParams {
    pub fn new(tau: f64, lambda: f64) -> Result<Self> {
        if !(tau >= 0.0 && lambda > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "filter needs tau >= 0 and lambda > 0 (tau = {tau}, lambda = {lambda})"
            )));
        }
        Ok(FilterParams { tau, lambda })
    }
}

/// Node offsets of a cell in the order (0,0), (1,0), (0,1), (1,1).
fn cell_nodes(side: usize, ci: usize, cj: usize) -> [usize; 4] {
    let k = cj * side + ci;
    [k, k + 1, k + side, k + side + 1]
}

/// Values and gradients of the four bilinear shape functions at local `(s, t)`.
fn shape(s: f64, t: f64, inv_h: f64) -> ([f64; 4], [[f64; 2]; 4]) {
    (
        [(1.0 - s) * (1.0 - t), s * (1.0 - t), (1.0 - s) * t, s * t],
        [
            [-(1.0 - t) * inv_h, -(1.0 - s) * inv_h],
            [(1.0 - t) * inv_h, -s * inv_h],
            [-t * inv_h, (1.0 - s) * inv_h],
            [t * inv_h, s * inv_h],
        ],
    )
}

/// Assembles `Σ ω (m θ_a θ_b + k(x) ∇θ_a·∇θ_b)` over the image mesh, where
/// `coef(x, ∇J)` returns `(m, k)` per quadrature point.
fn assemble<F>(level: u32, values: Option<&[f64]>, mut coef: F) -> SparseSymmetricMatrix
where
    F: FnMut([f64; 2]) -> (f64, f64),
{
    let quad = QuadratureRule::new(level);
    let n = quad.cells_per_side();
    let side = n + 1;
    let h = quad.cell_size();
    let inv_h = 1.0 / h;
    let mut t = TripletBuilder::with_capacity(side * side, 16 * n * n);
    for cj in 0..n {
        for ci in 0..n {
            let nodes = cell_nodes(side, ci, cj);
            let mut local = [[0.0; 4]; 4];
            for (w, x) in quad.cell_points(ci, cj) {
                let s = x[0] * inv_h - ci as f64;
                let r = x[1] * inv_h - cj as f64;
                let (phi, grad) = shape(s, r, inv_h);
                let g = match values {
                    Some(v) => {
                        let mut g = [0.0; 2];
                        for a in 0..4 {
                            g[0] += v[nodes[a]] * grad[a][0];
                            g[1] += v[nodes[a]] * grad[a][1];
                        }
                        g
                    }
                    None => [0.0; 2],
                };
                let (m, k) = coef(g);
                for a in 0..4 {
                    for b in 0..4 {
                        local[a][b] += w
                            * (m * phi[a] * phi[b]
                                + k * (grad[a][0] * grad[b][0] + grad[a][1] * grad[b][1]));
                    }
                }
            }
            for a in 0..4 {
                for b in 0..4 {
                    t.push(nodes[a], nodes[b], local[a][b]);
                }
            }
        }
    }
    t.build()
}

/// Mass matrix of the bilinear elements at `level`.
pub fn mass_matrix(level: u32) -> SparseSymmetricMatrix {
    assemble(level, None, |_| (1.0, 0.0))
}

/// Stiffness matrix weighted by `(1 + |∇J|²/λ²)⁻¹`.
pub fn anisotropic_stiffness(j: &Image, lambda: f64) -> SparseSymmetricMatrix {
    let il2 = 1.0 / (lambda * lambda);
    assemble(j.level(), Some(j.values()), |g| (0.0, 1.0 / (1.0 + il2 * (g[0] * g[0] + g[1] * g[1]))))
}

/// Applies `(M + τ S[J, λ])⁻¹ M` to `J`.
pub fn anisotropic_smooth(j: &Image, p: &FilterParams) -> Result<Image> {
    if p.tau == 0.0 {
        return Ok(j.clone());
    }
    let il2 = 1.0 / (p.lambda * p.lambda);
    let tau = p.tau;
    let system = assemble(j.level(), Some(j.values()), |g| {
        (1.0, tau / (1.0 + il2 * (g[0] * g[0] + g[1] * g[1])))
    });
    let rhs = mass_matrix(j.level()).mul_vec(j.values());
    let x = SpdSolver::new(system)?.solve(&rhs)?;
    Image::new(j.level(), x)
}

/// `∫ |∇u|²` of a bilinear image.
pub fn dirichlet_energy(u: &Image) -> f64 {
    let s = assemble(u.level(), None, |_| (0.0, 1.0));
    s.quadratic_form(u.values())
}
