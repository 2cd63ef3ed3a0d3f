//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use metamorph::energy::EnergyParams;
use metamorph::grid::{Deformation, Image, Point, QuadratureRule};

pub type M2 = [[f64; 2]; 2];

pub fn inv(m: M2) -> M2 {
    let d = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    [[m[1][1] / d, -m[0][1] / d], [-m[1][0] / d, m[0][0] / d]]
}

pub fn det(m: M2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

/// Central-difference Jacobian `J[i][k] = ∂_k f^i`.
pub fn fd_jacobian<F: Fn(Point) -> Point>(f: &F, x: Point, h: f64) -> M2 {
    let mut j = [[0.0; 2]; 2];
    for k in 0..2 {
        let mut xp = x;
        let mut xm = x;
        xp[k] += h;
        xm[k] -= h;
        let (a, b) = (f(xp), f(xm));
        for i in 0..2 {
            j[i][k] = (a[i] - b[i]) / (2.0 * h);
        }
    }
    j
}

/// Central-difference Laplacian of a vector field.
pub fn fd_laplacian<F: Fn(Point) -> Point>(f: &F, x: Point, h: f64) -> Point {
    let c = f(x);
    let mut l = [0.0; 2];
    for k in 0..2 {
        let mut xp = x;
        let mut xm = x;
        xp[k] += h;
        xm[k] -= h;
        let (a, b) = (f(xp), f(xm));
        for i in 0..2 {
            l[i] += (a[i] - 2.0 * c[i] + b[i]) / (h * h);
        }
    }
    l
}

/// Interior spline basis functions `Ψ_i`, one per unknown, in the unknown order.
pub fn basis_functions(level: u32) -> Vec<Deformation> {
    let n = Deformation::num_dofs(level);
    (0..n)
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            Deformation::from_dofs(level, &e).unwrap()
        })
        .collect()
}

fn displacement(d: &Deformation, x: Point) -> Point {
    let y = d.eval(x).unwrap();
    [y[0] - x[0], y[1] - x[1]]
}

fn inside(x: Point) -> Point {
    [x[0].clamp(0.0, 1.0), x[1].clamp(0.0, 1.0)]
}

/// Right-hand side of the fixed-point iteration computed the long way: the
/// image-gradient form of the operator plus the first deformation's
/// Euler–Lagrange equation tested with `ζ = ((DΦ)⁻¹Ψ)∘Φ₁`.
///
/// The derivatives of `ζ`, of `Φ` and of `Ψ` are central differences; the
/// deformation terms are integrated in their original, not partially
/// integrated, form on the mesh of level `fine_level`.
pub fn t_plus_el2(
    phi: &Deformation,
    phi1: &Deformation,
    u0: &Image,
    u1: &Image,
    p: &EnergyParams,
    fine_level: u32,
) -> Vec<f64> {
    let level = phi.level();
    let h_fd = 1e-4;
    let basis = basis_functions(level);
    let m2 = basis.len() / 2;
    let big_h = phi.mesh_size();
    let dphi = |y: Point| fd_jacobian(&|z| phi.eval(inside(z)).unwrap(), y, 1e-6);
    let fine = QuadratureRule::new(fine_level);
    let img = QuadratureRule::new(u0.level());
    let mut out = vec![0.0; basis.len()];
    for (idx, psi) in basis.iter().enumerate() {
        // Support of Ψ in the undeformed configuration, padded by one cell.
        let k = idx % m2;
        let m = Deformation::interior_side(level);
        let centre = [((k % m) + 1) as f64 * big_h, ((k / m) + 1) as f64 * big_h];
        let near = |x: Point| (x[0] - centre[0]).abs() < 3.0 * big_h && (x[1] - centre[1]).abs() < 3.0 * big_h;
        let zeta = |x: Point| -> Point {
            let y = inside(phi1.eval(inside(x)).unwrap());
            let a = inv(dphi(y));
            let s = displacement(psi, y);
            [a[0][0] * s[0] + a[0][1] * s[1], a[1][0] * s[0] + a[1][1] * s[1]]
        };
        let mut acc = 0.0;
        for (w, x) in fine.points().filter(|(_, x)| near(*x)) {
            let jet1 = phi1.jet(x).unwrap();
            let dz = fd_jacobian(&zeta, x, h_fd);
            let lz = fd_laplacian(&zeta, x, h_fd);
            let mut v = 2.0 * p.gamma * (jet1.laplacian[0] * lz[0] + jet1.laplacian[1] * lz[1]);
            for i in 0..2 {
                for j in 0..2 {
                    v += 2.0 * jet1.jacobian.m[i][j] * dz[i][j];
                }
            }
            acc += w * v;
        }
        for (w, x) in img.points().filter(|(_, x)| near(*x)) {
            let y1 = phi1.eval(x).unwrap();
            let y = inside(y1);
            let r = u1.eval(y).unwrap() - u0.eval(x).unwrap();
            if r == 0.0 {
                continue;
            }
            let g = u1.eval_grad(y).unwrap();
            let a = inv(dphi(y));
            let s = displacement(psi, y);
            let as_ = [a[0][0] * s[0] + a[0][1] * s[1], a[1][0] * s[0] + a[1][1] * s[1]];
            let zeta_x = as_;
            let det1 = det(fd_jacobian(&|z| phi1.eval(inside(z)).unwrap(), x, 1e-6));
            // Image-gradient term of the operator and of the first equation.
            let t_grad = -(2.0 / p.delta) * r * (g[0] * as_[0] + g[1] * as_[1]);
            let el_grad = (2.0 / p.delta) * r * (g[0] * zeta_x[0] + g[1] * zeta_x[1]);
            // (DΦ)^{-T} : (D²Φ (DΦ)^{-1} Ψ) − (DΦ)^{-T} : DΨ at y.
            let hcol: [M2; 2] = {
                let e = 1e-5;
                let mut hs = [[[0.0; 2]; 2]; 2];
                for kk in 0..2 {
                    let mut yp = y;
                    let mut ym = y;
                    yp[kk] += e;
                    ym[kk] -= e;
                    let (jp, jm) = (dphi(inside(yp)), dphi(inside(ym)));
                    let span = inside(yp)[kk] - inside(ym)[kk];
                    for i in 0..2 {
                        for j in 0..2 {
                            // hs[i][j][kk] = ∂_kk ∂_j Φ^i
                            hs[i][j][kk] = (jp[i][j] - jm[i][j]) / span;
                        }
                    }
                }
                hs
            };
            let mut first = 0.0;
            for j in 0..2 {
                for kk in 0..2 {
                    let mut mjk = 0.0;
                    for i in 0..2 {
                        for l in 0..2 {
                            mjk += hcol[i][j][kk] * a[i][l] * s[l];
                        }
                    }
                    first += a[kk][j] * mjk;
                }
            }
            let dpsi = fd_jacobian(&|z| displacement(psi, inside(z)), y, 1e-6);
            let mut second = 0.0;
            for j in 0..2 {
                for kk in 0..2 {
                    second += a[kk][j] * dpsi[j][kk];
                }
            }
            let t_match = -(1.0 / p.delta) * r * r / det1 * (first - second);
            acc += w * (t_grad + el_grad + t_match);
        }
        out[idx] = acc;
    }
    out
}

/// `max |a − b| / max |b|`.
pub fn rel_sup_error(a: &[f64], b: &[f64]) -> f64 {
    let num = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let den = b.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    num / den
}
