//! The Galerkin operator `R`, the gradient-free right-hand side `T̃` and the
//! fixed-point iteration `R d^{j+1} = T̃[Φ^j]` for the second deformation.

use crate::energy::{check_levels, scatter_basis, EnergyParams};
use crate::error::{Error, Result};
use crate::grid::{clamp_to_domain, BasisStencil, Deformation, Image, Point, QuadratureRule};
use crate::linalg::{Mat2, SparseSymmetricMatrix, SpdSolver, TripletBuilder};

/// Smallest admissible `det DΦ` at quadrature points.
pub const MIN_JACOBIAN_DET: f64 = 0.1;

fn guard(det: f64, x: Point) -> Result<()> {
    if det < MIN_JACOBIAN_DET || !det.is_finite() {
        return Err(Error::DegenerateDeformation { det, x: x[0], y: x[1] });
    }
    Ok(())
}

/// Active scalar unknowns at a stencil with their gradients and Laplacians,
/// after folding the ghost controls onto the interior ones.
fn active_unknowns(
    st: &BasisStencil,
    map: &[Option<(usize, f64)>],
    stride: usize,
    out: &mut Vec<(usize, [f64; 2], f64)>,
) {
    out.clear();
    for b in 0..4 {
        for a in 0..4 {
            if let Some((k, sign)) = map[st.full_index(a, b, stride)] {
                let (_, g, l) = st.value_grad_lap(a, b);
                let (g, l) = ([sign * g[0], sign * g[1]], sign * l);
                match out.iter_mut().find(|e| e.0 == k) {
                    Some(e) => {
                        e.1[0] += g[0];
                        e.1[1] += g[1];
                        e.2 += l;
                    }
                    None => out.push((k, g, l)),
                }
            }
        }
    }
}

/// Galerkin matrix of `(ζ, ψ) ↦ ∫ 2γ Δζ·Δψ + 2 Dζ:Dψ` on the interior control
/// displacements, integrated with the spline mesh quadrature. The two
/// components decouple, so the matrix is block diagonal.
pub fn assemble_r(level: u32, p: &EnergyParams) -> SparseSymmetricMatrix {
    let map = Deformation::dof_map(level);
    let stride = (1usize << level) + 3;
    let m2 = Deformation::interior_side(level).pow(2);
    let quad = QuadratureRule::new(level);
    let n = quad.cells_per_side();
    let mut t = TripletBuilder::with_capacity(2 * m2, 2 * 256 * n * n);
    let mut active = Vec::with_capacity(16);
    let mut local: Vec<(usize, usize, f64)> = Vec::with_capacity(256);
    for cj in 0..n {
        for ci in 0..n {
            local.clear();
            for (w, x) in quad.cell_points(ci, cj) {
                let st = BasisStencil::new(level, x);
                active_unknowns(&st, &map, stride, &mut active);
                for &(ka, ga, la) in &active {
                    for &(kb, gb, lb) in &active {
                        let v = 2.0 * w * (p.gamma * la * lb + ga[0] * gb[0] + ga[1] * gb[1]);
                        match local.iter_mut().find(|e| e.0 == ka && e.1 == kb) {
                            Some(e) => e.2 += v,
                            None => local.push((ka, kb, v)),
                        }
                    }
                }
            }
            for &(a, b, v) in &local {
                t.push(a, b, v);
                t.push(a + m2, b + m2, v);
            }
        }
    }
    t.build()
}

/// `∂_m (DΦ)⁻¹ = −A (∂_m DΦ) A` with `A = (DΦ)⁻¹`, for `m = 0, 1`.
fn inverse_jacobian_derivatives(a: &Mat2, hess: &[[[f64; 2]; 2]; 2]) -> [Mat2; 2] {
    let mut out = [Mat2::zero(); 2];
    for (m, o) in out.iter_mut().enumerate() {
        let d = Mat2::new([[hess[0][0][m], hess[0][1][m]], [hess[1][0][m], hess[1][1][m]]]);
        *o = a.mul(&d).mul(a).scale(-1.0);
    }
    out
}

/// Right-hand side `T̃[Φ](Ψ_i)` for every interior basis function `Ψ_i`, with
/// `phi` the current iterate and `phi1` the first deformation of the step.
///
/// The regularizer terms are integrated on the spline mesh, the matching term
/// on the image mesh. Only image values enter, never image gradients.
pub fn apply_t_tilde(
    phi: &Deformation,
    phi1: &Deformation,
    u0: &Image,
    u1: &Image,
    p: &EnergyParams,
) -> Result<Vec<f64>> {
    check_levels(u0, u1, phi1)?;
    if phi.level() != phi1.level() {
        return Err(Error::LevelMismatch(format!(
            "deformations at levels {} and {}",
            phi.level(),
            phi1.level()
        )));
    }
    let level = phi.level();
    let map = Deformation::dof_map(level);
    let stride = phi.control_side();
    let m2 = Deformation::interior_side(level).pow(2);
    let mut out = vec![0.0; 2 * m2];
    let g2 = 2.0 * p.gamma;

    for (w, x) in QuadratureRule::new(level).points() {
        let j1 = phi1.jet_unchecked(x);
        guard(j1.jacobian.det(), x)?;
        let (y, _) = clamp_to_domain(j1.value);
        let jy = phi.jet_unchecked(y);
        guard(jy.jacobian.det(), y)?;
        let a = jy.jacobian.inv()?;
        let da = inverse_jacobian_derivatives(&a, &jy.hessian);
        let dj = &j1.jacobian.m;
        // ∂_k (A∘Φ₁) = Σ_m (∂_m A)(y) ∂_k Φ₁^m
        let dak = [
            da[0].scale(dj[0][0]).add(&da[1].scale(dj[1][0])),
            da[0].scale(dj[0][1]).add(&da[1].scale(dj[1][1])),
        ];
        let g = &j1.grad_laplacian.m;
        // q[c][j] = Σ_k (Aᵀ DΔΦ₁)_{ck} ∂_k Φ₁^j
        let atg = a.transpose().mul(&j1.grad_laplacian);
        let q = atg.mul(&j1.jacobian.transpose());
        let mut s = [0.0; 2];
        for (c, sc) in s.iter_mut().enumerate() {
            let mut t2 = 0.0;
            for i in 0..2 {
                for (k, dakk) in dak.iter().enumerate() {
                    t2 += g[i][k] * dakk.m[i][c];
                }
            }
            let t3 = j1.laplacian[0] * a.m[0][c] + j1.laplacian[1] * a.m[1][c];
            *sc = -g2 * t2 - 2.0 * t3;
        }
        let st = BasisStencil::new(level, y);
        scatter_basis(&st, &map, stride, m2, &mut out, |v, gb, _| {
            [
                w * (-g2 * (q.m[0][0] * gb[0] + q.m[0][1] * gb[1]) + s[0] * v),
                w * (-g2 * (q.m[1][0] * gb[0] + q.m[1][1] * gb[1]) + s[1] * v),
            ]
        });
    }

    let inv_delta = 1.0 / p.delta;
    for (w, x) in QuadratureRule::new(u0.level()).points() {
        let (y1, dphi1) = phi1.value_jacobian_unchecked(x);
        let det1 = dphi1.det();
        guard(det1, x)?;
        let (y, _) = clamp_to_domain(y1);
        let r = u1.eval_unchecked(y) - u0.eval_unchecked(x);
        if r == 0.0 {
            continue;
        }
        let coef = -w * inv_delta * r * r / det1;
        let jy = phi.jet_unchecked(y);
        guard(jy.jacobian.det(), y)?;
        let a = jy.jacobian.inv()?;
        let h = &jy.hessian;
        // t_i = Σ_{jk} A_{kj} ∂_j∂_k Φ^i, then (Aᵀ t)_c
        let mut t = [0.0; 2];
        for (i, ti) in t.iter_mut().enumerate() {
            for j in 0..2 {
                for k in 0..2 {
                    *ti += a.m[k][j] * h[i][j][k];
                }
            }
        }
        let v = a.transpose().mul_vec(t);
        let st = BasisStencil::new(level, y);
        scatter_basis(&st, &map, stride, m2, &mut out, |b, gb, _| {
            [
                coef * (v[0] * b - (a.m[0][0] * gb[0] + a.m[1][0] * gb[1])),
                coef * (v[1] * b - (a.m[0][1] * gb[0] + a.m[1][1] * gb[1])),
            ]
        });
    }
    Ok(out)
}

/// Sup-norm over interior unknowns of `R[Φ₂](Ψ_i) − T̃[Φ₂](Ψ_i)`.
pub fn el_residual(
    r: &SparseSymmetricMatrix,
    phi2: &Deformation,
    phi1: &Deformation,
    u0: &Image,
    u1: &Image,
    p: &EnergyParams,
) -> Result<f64> {
    let rhs = apply_t_tilde(phi2, phi1, u0, u1, p)?;
    let lhs = r.mul_vec(&phi2.dofs());
    Ok(lhs.iter().zip(&rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

/// Outcome of one fixed-point solve.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointDiagnostics {
    pub iterations: usize,
    /// Sup-norm control difference of every iteration, in order.
    pub differences: Vec<f64>,
    /// Sup-norm residual of the discrete Euler–Lagrange equation at the result.
    pub residual: f64,
}

impl FixedPointDiagnostics {
    pub fn final_difference(&self) -> f64 {
        self.differences.last().copied().unwrap_or(0.0)
    }
}

/// `R` assembled and factored once for a spline level and parameter set.
#[derive(Debug, Clone)]
pub struct FixedPointSolver {
    level: u32,
    params: EnergyParams,
    solver: SpdSolver,
}

impl FixedPointSolver {
    pub fn new(level: u32, params: EnergyParams) -> Result<Self> {
        if level == 0 {
            return Err(Error::InvalidArgument("spline level must be at least 1".into()));
        }
        let solver = SpdSolver::new(assemble_r(level, &params))?;
        Ok(FixedPointSolver { level, params, solver })
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn params(&self) -> &EnergyParams {
        &self.params
    }

    pub fn matrix(&self) -> &SparseSymmetricMatrix {
        self.solver.matrix()
    }

    /// Iterates `Φ^{j+1} = R⁻¹ T̃[Φ^j]` from the identity until the sup-norm
    /// control difference drops below `threshold`.
    pub fn solve(
        &self,
        phi1: &Deformation,
        u0: &Image,
        u1: &Image,
        threshold: f64,
        max_iterations: usize,
    ) -> Result<(Deformation, FixedPointDiagnostics)> {
        if phi1.level() != self.level {
            return Err(Error::LevelMismatch(format!(
                "solver for level {} given a deformation at level {}",
                self.level,
                phi1.level()
            )));
        }
        let mut phi = Deformation::identity(self.level);
        let mut differences = Vec::new();
        for it in 1..=max_iterations {
            let rhs = apply_t_tilde(&phi, phi1, u0, u1, &self.params)?;
            let next = Deformation::from_dofs(self.level, &self.solver.solve(&rhs)?)?;
            let diff = next.max_control_diff(&phi);
            differences.push(diff);
            phi = next;
            log::trace!("fixed point iteration {it}: difference {diff:e}");
            if diff < threshold {
                let residual = el_residual(self.matrix(), &phi, phi1, u0, u1, &self.params)?;
                return Ok((phi, FixedPointDiagnostics { iterations: it, differences, residual }));
            }
            if !diff.is_finite() {
                break;
            }
        }
        Err(Error::NonConvergence {
            iterations: differences.len(),
            difference: differences.last().copied().unwrap_or(f64::NAN),
        })
    }
}

/// Computes `Φ₂` for the step `(u0, u1, Φ₁)`; see [`FixedPointSolver::solve`].
pub fn fixed_point_solve(
    phi1: &Deformation,
    u0: &Image,
    u1: &Image,
    p: &EnergyParams,
    threshold: f64,
    max_iterations: usize,
) -> Result<(Deformation, FixedPointDiagnostics)> {
    FixedPointSolver::new(phi1.level(), *p)?.solve(phi1, u0, u1, threshold, max_iterations)
}
