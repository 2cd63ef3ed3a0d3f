//! Spatially discrete matching energy
//!
//! `W[u, ũ, Φ] = Σ_H ω (|DΦ − I|² + γ|ΔΦ|²) + (1/δ) Σ_h ω (ũ∘Φ − u)²`,
//!
//! with the regularizer summed over the spline mesh quadrature and the
//! mismatch over the image mesh quadrature, and its gradient with respect to
//! the interior control displacements.

use crate::error::{Error, Result};
use crate::grid::{clamp_to_domain, BasisStencil, Deformation, Image, QuadratureRule};
use crate::linalg::Mat2;

/// Weights of the thin-plate term (`gamma`) and of the mismatch (`1/delta`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParams {
    pub gamma: f64,
    pub delta: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        EnergyParams { gamma: 1e-4, delta: 1e-2 }
    }
}

impl EnergyParams {
    pub fn new(gamma: f64, delta: f64) -> Result<Self> {
        if !(gamma > 0.0 && delta > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "energy weights must be positive (gamma = {gamma}, delta = {delta})"
            )));
        }
        Ok(EnergyParams { gamma, delta })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyBreakdown {
    /// `∫ |DΦ − I|² + γ |ΔΦ|²`
    pub regularizer: f64,
    /// `(1/δ) ∫ (ũ∘Φ − u)²`
    pub matching: f64,
    pub total: f64,
    /// Number of image quadrature points whose image under `Φ` left the unit
    /// square and was clamped back.
    pub clamped: usize,
}

pub(crate) fn check_levels(u: &Image, u_tilde: &Image, phi: &Deformation) -> Result<()> {
    u.check_same_level(u_tilde)?;
    if phi.level() >= u.level() {
        return Err(Error::LevelMismatch(format!(
            "spline level {} must be below image level {}",
            phi.level(),
            u.level()
        )));
    }
    Ok(())
}

/// Regularizer part `∫ |DΦ − I|² + γ|ΔΦ|²` on the spline mesh quadrature.
pub fn regularizer_energy(phi: &Deformation, gamma: f64) -> f64 {
    regularizer_energy_on(phi, gamma, phi.level())
}

/// The regularizer integrated with the quadrature of spline level
/// `quad_level ≥ phi.level()`. On a finer mesh the spline is still a
/// polynomial per cell, so this equals the energy of the prolongated spline.
pub(crate) fn regularizer_energy_on(phi: &Deformation, gamma: f64, quad_level: u32) -> f64 {
    let quad = QuadratureRule::new(quad_level);
    quad.points()
        .map(|(w, x)| {
            let jet = phi.jet_unchecked(x);
            let dd = jet.jacobian.sub(&Mat2::identity());
            let lap = jet.laplacian;
            w * (dd.ddot(&dd) + gamma * (lap[0] * lap[0] + lap[1] * lap[1]))
        })
        .sum()
}

/// Evaluates the discrete matching energy.
pub fn matching_energy(
    u: &Image,
    u_tilde: &Image,
    phi: &Deformation,
    p: &EnergyParams,
) -> Result<EnergyBreakdown> {
    matching_energy_on(u, u_tilde, phi, p, phi.level())
}

/// [`matching_energy`] with the regularizer integrated on spline level `quad_level`.
pub(crate) fn matching_energy_on(
    u: &Image,
    u_tilde: &Image,
    phi: &Deformation,
    p: &EnergyParams,
    quad_level: u32,
) -> Result<EnergyBreakdown> {
    check_levels(u, u_tilde, phi)?;
    let regularizer = regularizer_energy_on(phi, p.gamma, quad_level);
    let quad = QuadratureRule::new(u.level());
    let mut clamped = 0;
    let mut mismatch = 0.0;
    for (w, x) in quad.points() {
        let (y, moved) = clamp_to_domain(phi.value_unchecked(x));
        clamped += moved as usize;
        let r = u_tilde.eval_unchecked(y) - u.eval_unchecked(x);
        mismatch += w * r * r;
    }
    if clamped > 0 {
        log::debug!("{clamped} deformed quadrature points clamped to the domain");
    }
    let matching = mismatch / p.delta;
    Ok(EnergyBreakdown { regularizer, matching, total: regularizer + matching, clamped })
}

/// Scatters `coef_c * B(x)`-type contributions of the 16 active B-splines onto
/// the interior unknowns. `f(value, grad, lap)` returns the per-component weight.
#[inline]
pub(crate) fn scatter_basis<F>(
    st: &BasisStencil,
    map: &[Option<(usize, f64)>],
    stride: usize,
    m2: usize,
    out: &mut [f64],
    mut f: F,
) where
    F: FnMut(f64, [f64; 2], f64) -> [f64; 2],
{
    for b in 0..4 {
        for a in 0..4 {
            if let Some((k, sign)) = map[st.full_index(a, b, stride)] {
                let (v, g, l) = st.value_grad_lap(a, b);
                let c = f(v, g, l);
                out[k] += sign * c[0];
                out[k + m2] += sign * c[1];
            }
        }
    }
}

/// Gradient of the discrete matching energy with respect to the interior
/// control displacements (layout of [`Deformation::dofs`]).
pub fn matching_energy_grad(
    u: &Image,
    u_tilde: &Image,
    phi: &Deformation,
    p: &EnergyParams,
) -> Result<Vec<f64>> {
    matching_energy_grad_on(u, u_tilde, phi, p, phi.level())
}

/// [`matching_energy_grad`] with the regularizer integrated on spline level `quad_level`.
pub(crate) fn matching_energy_grad_on(
    u: &Image,
    u_tilde: &Image,
    phi: &Deformation,
    p: &EnergyParams,
    quad_level: u32,
) -> Result<Vec<f64>> {
    check_levels(u, u_tilde, phi)?;
    let level = phi.level();
    let map = Deformation::dof_map(level);
    let stride = phi.control_side();
    let m = Deformation::interior_side(level);
    let m2 = m * m;
    let mut grad = vec![0.0; 2 * m2];

    let quad_h = QuadratureRule::new(quad_level);
    for (w, x) in quad_h.points() {
        let jet = phi.jet_unchecked(x);
        let dd = jet.jacobian.sub(&Mat2::identity());
        let lap = jet.laplacian;
        let st = phi.stencil(x);
        scatter_basis(&st, &map, stride, m2, &mut grad, |_, g, l| {
            [
                2.0 * w * (dd.m[0][0] * g[0] + dd.m[0][1] * g[1] + p.gamma * lap[0] * l),
                2.0 * w * (dd.m[1][0] * g[0] + dd.m[1][1] * g[1] + p.gamma * lap[1] * l),
            ]
        });
    }

    let quad_img = QuadratureRule::new(u.level());
    let scale = 2.0 / p.delta;
    for (w, x) in quad_img.points() {
        let (y, _) = clamp_to_domain(phi.value_unchecked(x));
        let r = u_tilde.eval_unchecked(y) - u.eval_unchecked(x);
        if r == 0.0 {
            continue;
        }
        let g = u_tilde.grad_unchecked(y);
        let coef = [scale * w * r * g[0], scale * w * r * g[1]];
        let st = phi.stencil(x);
        scatter_basis(&st, &map, stride, m2, &mut grad, |v, _, _| [coef[0] * v, coef[1] * v]);
    }
    Ok(grad)
}

/// `K Σ_k W[u_{k-1}, u_k, Φ_k]` for `K + 1` images and `K` deformations.
pub fn path_energy(images: &[Image], phis: &[Deformation], p: &EnergyParams) -> Result<f64> {
    if images.len() < 2 || phis.len() + 1 != images.len() {
        return Err(Error::InvalidArgument(format!(
            "{} images and {} deformations do not form a path",
            images.len(),
            phis.len()
        )));
    }
    let k = phis.len() as f64;
    let mut sum = 0.0;
    for (pair, phi) in images.windows(2).zip(phis) {
        sum += matching_energy(&pair[0], &pair[1], phi, p)?.total;
    }
    Ok(k * sum)
}

/// Smallest `det DΦ` over the spline mesh quadrature points and where it occurs.
pub fn min_jacobian_det(phi: &Deformation) -> (f64, [f64; 2]) {
    min_jacobian_det_on(phi, phi.level())
}

pub(crate) fn min_jacobian_det_on(phi: &Deformation, quad_level: u32) -> (f64, [f64; 2]) {
    let quad = QuadratureRule::new(quad_level);
    let mut best = (f64::INFINITY, [0.0; 2]);
    for (_, x) in quad.points() {
        let det = phi.value_jacobian_unchecked(x).1.det();
        if det < best.0 {
            best = (det, x);
        }
    }
    best
}
