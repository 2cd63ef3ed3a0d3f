//! Discrete geodesic interpolation between two images.
//!
//! For fixed deformations the path energy is quadratic in the interior images,
//! so they are eliminated by an exact linear solve. The remaining reduced energy
//! `F(Φ_1, …, Φ_K) = min_u E_K[u, Φ]` is minimized over all deformations at once
//! by the multilevel conjugate gradient descent of the registration module.

use std::cell::RefCell;

use crate::energy::{
    check_levels, matching_energy_grad_on, min_jacobian_det_on, regularizer_energy_on, EnergyParams,
};
use crate::error::{Error, Result};
use crate::filtering::mass_matrix;
use crate::grid::{clamp_to_domain, prolong_deformation, Deformation, Image, Point, QuadratureRule};
use crate::linalg::{matrix_free_cg, SpdSolver};
use crate::registration::{descend, Objective, RegistrationConfig, DESCENT_MIN_DET};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterpolationConfig {
    /// Number of segments `K`.
    pub segments: usize,
    /// Iteration cap of the descent on each spline level.
    pub max_iterations: usize,
    /// A level ends once the path energy decreased by less than this fraction
    /// over the last `registration.restart_period` iterations.
    pub tolerance: f64,
    /// Level schedule, line search and gradient tolerance of the descent.
    pub registration: RegistrationConfig,
}

impl InterpolationConfig {
    pub fn new(segments: usize, level: u32) -> Self {
        InterpolationConfig {
            segments,
            max_iterations: 1000,
            tolerance: 1e-6,
            registration: RegistrationConfig::new(level),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments < 2 {
            return Err(Error::InvalidArgument(format!(
                "interpolation needs at least 2 segments, got {}",
                self.segments
            )));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::InvalidArgument("path energy tolerance must be non-negative".into()));
        }
        self.registration.validate()
    }
}

#[derive(Debug, Clone)]
pub struct InterpolationResult {
    /// `u_0, …, u_K`; the end points are the inputs.
    pub images: Vec<Image>,
    /// `Φ_1, …, Φ_K`.
    pub deformations: Vec<Deformation>,
    /// Path energy of every accepted iterate, starting with the identity
    /// deformations and the linear blend.
    pub energies: Vec<f64>,
    /// Accepted iterations per spline level, coarse to fine.
    pub iterations: Vec<usize>,
    /// Whether the finest level met its stopping rule before the cap.
    pub converged: bool,
}

/// Bilinear interpolation weights of the image grid at a list of points.
struct Sampling {
    nodes: Vec<[u32; 4]>,
    weights: Vec<[f64; 4]>,
}

impl Sampling {
    fn new(level: u32, points: impl Iterator<Item = Point>) -> Self {
        let n = 1usize << level;
        let side = n + 1;
        let inv_h = n as f64;
        let (nodes, weights) = points
            .map(|x| {
                let ci = ((x[0] * inv_h).floor() as usize).min(n - 1);
                let cj = ((x[1] * inv_h).floor() as usize).min(n - 1);
                let (s, t) = (x[0] * inv_h - ci as f64, x[1] * inv_h - cj as f64);
                let k = (cj * side + ci) as u32;
                let sd = side as u32;
                (
                    [k, k + 1, k + sd, k + sd + 1],
                    [(1.0 - s) * (1.0 - t), s * (1.0 - t), (1.0 - s) * t, s * t],
                )
            })
            .unzip();
        Sampling { nodes, weights }
    }

    fn eval(&self, u: &[f64], out: &mut [f64]) {
        for ((o, n), w) in out.iter_mut().zip(&self.nodes).zip(&self.weights) {
            *o = (0..4).map(|p| w[p] * u[n[p] as usize]).sum();
        }
    }

    /// `out += scale · Sᵀ r`.
    fn scatter(&self, r: &[f64], scale: f64, out: &mut [f64]) {
        for ((ri, n), w) in r.iter().zip(&self.nodes).zip(&self.weights) {
            for p in 0..4 {
                out[n[p] as usize] += scale * w[p] * ri;
            }
        }
    }
}

/// The quadratic image problem for fixed deformations.
struct PathSystem {
    k: usize,
    nodes: usize,
    quad_weights: Vec<f64>,
    /// Evaluation at the quadrature points.
    base: Sampling,
    /// Evaluation at `Φ_s(x)` for every segment `s = 1..K`.
    warped: Vec<Sampling>,
}

impl PathSystem {
    fn new(level: u32, quad: &QuadratureRule, phis: &[Deformation]) -> Self {
        let quad_weights = quad.points().map(|(w, _)| w).collect();
        let base = Sampling::new(level, quad.points().map(|(_, x)| x));
        let warped = phis
            .iter()
            .map(|phi| Sampling::new(level, quad.points().map(|(_, x)| clamp_to_domain(phi.value_unchecked(x)).0)))
            .collect();
        let side = (1usize << level) + 1;
        PathSystem { k: phis.len(), nodes: side * side, quad_weights, base, warped }
    }

    /// Weighted mismatch `w (u_s∘Φ_s − u_{s−1})` at the quadrature points of
    /// every segment, given all `K + 1` images.
    fn residuals(&self, images: &[&[f64]]) -> Vec<Vec<f64>> {
        let q = self.quad_weights.len();
        let mut a = vec![0.0; q];
        let mut b = vec![0.0; q];
        (1..=self.k)
            .map(|s| {
                self.warped[s - 1].eval(images[s], &mut a);
                self.base.eval(images[s - 1], &mut b);
                a.iter().zip(&b).zip(&self.quad_weights).map(|((x, y), w)| w * (x - y)).collect()
            })
            .collect()
    }

    /// Half the gradient of `Σ_s ∫ (u_s∘Φ_s − u_{s−1})²` with respect to the
    /// interior images, which are stacked in `interior`.
    fn gradient(&self, first: &[f64], last: &[f64], interior: &[f64]) -> Vec<f64> {
        let (n, k) = (self.nodes, self.k);
        let images = stack(first, last, interior, n);
        let mut out = vec![0.0; (k - 1) * n];
        for (s, r) in self.residuals(&images).iter().enumerate() {
            let s = s + 1;
            if s < k {
                self.warped[s - 1].scatter(r, 1.0, &mut out[(s - 1) * n..s * n]);
            }
            if s > 1 {
                self.base.scatter(r, -1.0, &mut out[(s - 2) * n..(s - 1) * n]);
            }
        }
        out
    }

    fn mismatch(&self, first: &[f64], last: &[f64], interior: &[f64]) -> Vec<f64> {
        self.residuals(&stack(first, last, interior, self.nodes))
            .iter()
            .map(|r| r.iter().zip(&self.quad_weights).map(|(ri, w)| ri * ri / w).sum())
            .collect()
    }
}

fn stack<'a>(first: &'a [f64], last: &'a [f64], interior: &'a [f64], n: usize) -> Vec<&'a [f64]> {
    let mut v = vec![first];
    v.extend(interior.chunks(n));
    v.push(last);
    v
}

/// Preconditioner `T⁻¹ ⊗ M⁻¹`: the exact inverse of the image operator at
/// identity deformations, with `T = tridiag(−1, 2, −1)` coupling neighbouring
/// time steps and `M` the mass matrix.
struct IdentityPreconditioner {
    mass: SpdSolver,
    t_inv: Vec<Vec<f64>>,
    nodes: usize,
}

impl IdentityPreconditioner {
    fn new(level: u32, k: usize) -> Result<Self> {
        let m = k - 1;
        let t_inv = (1..=m)
            .map(|i| (1..=m).map(|j| (i.min(j) * (m + 1 - i.max(j))) as f64 / (m + 1) as f64).collect())
            .collect();
        let mass = SpdSolver::new(mass_matrix(level))?;
        let side = (1usize << level) + 1;
        Ok(IdentityPreconditioner { mass, t_inv, nodes: side * side })
    }

    fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        let n = self.nodes;
        let y: Vec<Vec<f64>> = r.chunks(n).map(|c| self.mass.solve(c)).collect::<Result<_>>()?;
        let mut z = vec![0.0; r.len()];
        for (i, zi) in z.chunks_mut(n).enumerate() {
            for (j, yj) in y.iter().enumerate() {
                let t = self.t_inv[i][j];
                zi.iter_mut().zip(yj).for_each(|(a, b)| *a += t * b);
            }
        }
        Ok(z)
    }
}

const IMAGE_SOLVE_TOLERANCE: f64 = 1e-12;

/// Interior images minimizing the path energy for fixed deformations, stacked
/// into one vector. `start` is an initial guess for the iteration.
fn solve_images(
    sys: &PathSystem,
    pre: &IdentityPreconditioner,
    first: &[f64],
    last: &[f64],
    start: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let zero = vec![0.0; sys.nodes];
    let rhs: Vec<f64> = sys.gradient(first, last, &vec![0.0; first.len() * (sys.k - 1)]).iter().map(|v| -v).collect();
    let mut failure = None;
    let x = matrix_free_cg(
        |x| sys.gradient(&zero, &zero, x),
        |r| {
            pre.apply(r).unwrap_or_else(|e| {
                failure = Some(e);
                r.to_vec()
            })
        },
        &rhs,
        start,
        IMAGE_SOLVE_TOLERANCE,
        2000,
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(x),
    }
}

/// Images `u_0, …, u_K` minimizing the path energy for fixed deformations
/// `Φ_1, …, Φ_K`, with the end points fixed.
pub fn optimal_images(u0: &Image, uk: &Image, phis: &[Deformation]) -> Result<Vec<Image>> {
    u0.check_same_level(uk)?;
    if phis.len() < 2 {
        return Err(Error::InvalidArgument("a path needs at least 2 segments".into()));
    }
    let level = u0.level();
    let quad = QuadratureRule::new(level);
    let sys = PathSystem::new(level, &quad, phis);
    let pre = IdentityPreconditioner::new(level, phis.len())?;
    let x = solve_images(&sys, &pre, u0.values(), uk.values(), None)?;
    stack_images(u0, uk, &x)
}

fn stack_images(u0: &Image, uk: &Image, interior: &[f64]) -> Result<Vec<Image>> {
    let n = u0.values().len();
    let mut images = vec![u0.clone()];
    for c in interior.chunks(n) {
        images.push(Image::new(u0.level(), c.to_vec())?);
    }
    images.push(uk.clone());
    Ok(images)
}

/// The reduced path energy as a function of the stacked spline unknowns.
struct ReducedPath<'a> {
    u0: &'a Image,
    uk: &'a Image,
    p: &'a EnergyParams,
    level: u32,
    /// Finest spline level; its quadrature is used on every level.
    target: u32,
    k: usize,
    tolerance: f64,
    window: usize,
    quad: QuadratureRule,
    pre: IdentityPreconditioner,
    /// Unknowns and interior images of the most recent evaluation.
    last: RefCell<(Vec<f64>, Vec<f64>)>,
}

impl ReducedPath<'_> {
    fn reduced_energy(&self, x: &[f64], phis: &[Deformation]) -> Result<f64> {
        let (sys, images) = self.images_at(x, phis)?;
        let mismatch: f64 = sys.mismatch(self.u0.values(), self.uk.values(), &images).iter().sum();
        let reg: f64 = phis.iter().map(|phi| regularizer_energy_on(phi, self.p.gamma, self.target)).sum();
        Ok(self.k as f64 * (reg + mismatch / self.p.delta))
    }

    fn deformations(&self, x: &[f64]) -> Result<Vec<Deformation>> {
        let d = Deformation::num_dofs(self.level);
        x.chunks(d).map(|c| Deformation::from_dofs(self.level, c)).collect()
    }

    fn images_at(&self, x: &[f64], phis: &[Deformation]) -> Result<(PathSystem, Vec<f64>)> {
        let sys = PathSystem::new(self.u0.level(), &self.quad, phis);
        let last = self.last.borrow();
        let start = (!last.1.is_empty()).then_some(last.1.as_slice());
        let images = solve_images(&sys, &self.pre, self.u0.values(), self.uk.values(), start)?;
        drop(last);
        *self.last.borrow_mut() = (x.to_vec(), images.clone());
        Ok((sys, images))
    }
}

impl Objective for ReducedPath<'_> {
    fn level(&self) -> u32 {
        self.level
    }

    fn energy(&self, x: &[f64]) -> Result<Option<f64>> {
        let phis = self.deformations(x)?;
        if phis.iter().any(|phi| min_jacobian_det_on(phi, self.target).0 < DESCENT_MIN_DET) {
            return Ok(None);
        }
        self.reduced_energy(x, &phis).map(Some)
    }

    fn unguarded_energy(&self, x: &[f64]) -> Result<f64> {
        self.reduced_energy(x, &self.deformations(x)?)
    }

    /// By stationarity in the images, the gradient of the reduced energy is
    /// the partial gradient with the optimal images held fixed.
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let phis = self.deformations(x)?;
        let cached = self.last.borrow().0 == x;
        let interior = if cached {
            self.last.borrow().1.clone()
        } else {
            self.images_at(x, &phis)?.1
        };
        let images = stack_images(self.u0, self.uk, &interior)?;
        let mut g = Vec::with_capacity(x.len());
        for (s, phi) in phis.iter().enumerate() {
            let gs = matching_energy_grad_on(&images[s], &images[s + 1], phi, self.p, self.target)?;
            g.extend(gs.iter().map(|v| self.k as f64 * v));
        }
        Ok(g)
    }

    fn rejection(&self, x: &[f64]) -> Error {
        let phis = match self.deformations(x) {
            Ok(p) => p,
            Err(e) => return e,
        };
        let (det, at) = phis
            .iter()
            .map(|phi| min_jacobian_det_on(phi, self.target))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .unwrap_or((1.0, [0.0; 2]));
        Error::DegenerateDeformation { det, x: at[0], y: at[1] }
    }

    fn settled(&self, history: &[f64]) -> bool {
        let n = history.len();
        n > self.window && history[n - 1 - self.window] - history[n - 1] <= self.tolerance * history[n - 1]
    }
}

/// Computes a discrete geodesic from `u0` to `uk` with `cfg.segments` segments.
///
/// Starts from identity deformations, for which the optimal interior images are
/// the linear blend of the end points, and descends on the reduced path energy
/// from the coarsest spline level to `cfg.registration.level`. Every accepted
/// iterate lowers the path energy.
pub fn interpolate(
    u0: &Image,
    uk: &Image,
    p: &EnergyParams,
    cfg: &InterpolationConfig,
) -> Result<InterpolationResult> {
    cfg.validate()?;
    let reg = &cfg.registration;
    check_levels(u0, uk, &Deformation::identity(reg.level))?;
    let k = cfg.segments;
    let mut level = reg.first_level();
    let mut x = vec![0.0; k * Deformation::num_dofs(level)];
    let mut energies = Vec::new();
    let mut iterations = Vec::new();
    let mut interior = Vec::new();
    let level_cfg = RegistrationConfig { max_iterations: cfg.max_iterations, ..*reg };
    let pre = IdentityPreconditioner::new(u0.level(), k)?;
    let mut pre = Some(pre);
    loop {
        let prob = ReducedPath {
            u0,
            uk,
            p,
            level,
            target: reg.level,
            k,
            tolerance: cfg.tolerance,
            window: reg.restart_period,
            quad: QuadratureRule::new(u0.level()),
            pre: pre.take().expect("preconditioner is returned after each level"),
            last: RefCell::new((Vec::new(), interior)),
        };
        let trusted = level > reg.first_level();
        let (next, its, conv) = descend(&prob, &level_cfg, x, trusted, &mut energies)?;
        log::info!("interpolation level {level}: {its} iterations, path energy {:.6e}", energies.last().unwrap());
        iterations.push(its);
        let phis = prob.deformations(&next)?;
        let ReducedPath { pre: used, last, .. } = prob;
        pre = Some(used);
        interior = last.into_inner().1;
        if level >= reg.level {
            let images = optimal_images(u0, uk, &phis)?;
            return Ok(InterpolationResult { images, deformations: phis, energies, iterations, converged: conv });
        }
        level += 1;
        x = phis.iter().flat_map(|phi| prolong_deformation(phi).dofs()).collect();
    }
}
