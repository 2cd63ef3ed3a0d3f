//! The discrete exponential map.
//!
//! One step takes `(U₀, U₁, Φ₁)` to `(U₂, Φ₂)`: the second deformation solves
//! the Euler–Lagrange equation `R d₂ = T̃[Φ₂]` by fixed-point iteration, and the
//! new image follows from the pointwise update
//! `U₂ = ((U₁ − U₀∘Φ₁⁻¹) / det DΦ₁∘Φ₁⁻¹)∘Φ₂⁻¹ + U₁∘Φ₂⁻¹`.
//! [`exp_k`] chains such steps, reusing each step's `Φ₂` as the next `Φ₁`.

mod inverse;
mod operators;
mod update;

pub use inverse::invert_deformation;
pub use operators::{
    apply_t_tilde, assemble_r, el_residual, fixed_point_solve, FixedPointDiagnostics,
    FixedPointSolver, MIN_JACOBIAN_DET,
};
pub use update::{image_update, FilterTarget, Smoothing};

use crate::energy::{matching_energy, min_jacobian_det, EnergyParams};
use crate::error::{Error, Result};
use crate::filtering::FilterParams;
use crate::grid::{clamp_to_domain, Deformation, Image, Point};
use crate::registration::{register, RegistrationConfig, RegistrationResult};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootingConfig {
    /// Fixed-point stop threshold on the sup-norm control difference.
    pub threshold: f64,
    pub max_iterations: usize,
    pub smoothing: bool,
    /// Filter time step for the image with index 2; it decays by `beta` per step.
    pub tau0: f64,
    pub beta: f64,
    pub lambda: f64,
    pub filter_target: FilterTarget,
    /// Register every step afresh instead of inheriting `Φ₁` from the previous step.
    pub reregister: bool,
    pub registration: RegistrationConfig,
}

impl ShootingConfig {
    pub fn new(level: u32) -> Self {
        ShootingConfig {
            threshold: 1e-12,
            max_iterations: 200,
            smoothing: true,
            tau0: 1e-3,
            beta: 0.8,
            lambda: 0.5,
            filter_target: FilterTarget::Quotient,
            reregister: false,
            registration: RegistrationConfig::new(level),
        }
    }

    pub fn level(&self) -> u32 {
        self.registration.level
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0) || self.max_iterations == 0 {
            return Err(Error::InvalidArgument(
                "fixed-point threshold and iteration cap must be positive".into(),
            ));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::InvalidArgument(format!("beta = {} is not in (0, 1)", self.beta)));
        }
        FilterParams::new(self.tau0, self.lambda)?;
        self.registration.validate()
    }

    /// Smoothing used when computing the image with index `k ≥ 2`.
    pub fn smoothing_for(&self, k: usize) -> Smoothing {
        if !self.smoothing {
            return Smoothing::Off;
        }
        let tau = self.tau0 * self.beta.powi(k as i32 - 2);
        Smoothing::On(FilterParams { tau, lambda: self.lambda }, self.filter_target)
    }
}

/// Diagnostics of the step producing `U_k` and `Φ_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub index: usize,
    pub fixed_point: FixedPointDiagnostics,
    pub min_det: f64,
    /// `W[U_{k-1}, U_k, Φ_k]`.
    pub energy: f64,
}

/// Output of one exponential step.
#[derive(Debug, Clone)]
pub struct Exp2Output {
    pub image: Image,
    pub phi: Deformation,
    pub fixed_point: FixedPointDiagnostics,
}

#[derive(Debug)]
pub struct StepFailure {
    pub index: usize,
    pub error: Error,
}

#[derive(Debug)]
pub struct ShootingResult {
    /// `U_0, …, U_K` (fewer if a step failed).
    pub images: Vec<Image>,
    /// `Φ_1, …, Φ_K`.
    pub deformations: Vec<Deformation>,
    /// `V_k = K (Φ_k − Id)` sampled at the image nodes, one field per deformation.
    pub velocities: Vec<Vec<Point>>,
    /// `I_k = U_k∘Φ_k − U_{k−1}`.
    pub modulations: Vec<Image>,
    pub registration: RegistrationResult,
    /// One entry per step with index `k ≥ 2`.
    pub steps: Vec<StepDiagnostics>,
    pub failure: Option<StepFailure>,
}

/// `K (Φ − Id)` at the nodes of an image grid of the given level.
pub fn velocity_field(phi: &Deformation, steps: usize, image_level: u32) -> Vec<Point> {
    let side = (1usize << image_level) + 1;
    let h = 1.0 / (side - 1) as f64;
    let k = steps as f64;
    (0..side * side)
        .map(|n| {
            let x = [(n % side) as f64 * h, (n / side) as f64 * h];
            let y = phi.value_unchecked(x);
            [k * (y[0] - x[0]), k * (y[1] - x[1])]
        })
        .collect()
}

/// `U_k∘Φ_k − U_{k−1}` at the image nodes.
pub fn intensity_modulation(prev: &Image, next: &Image, phi: &Deformation) -> Result<Image> {
    prev.check_same_level(next)?;
    Ok(prev.map_nodes(|x, v| next.eval_unchecked(clamp_to_domain(phi.value_unchecked(x)).0) - v))
}

fn step(
    solver: &FixedPointSolver,
    u0: &Image,
    u1: &Image,
    phi1: &Deformation,
    cfg: &ShootingConfig,
    smoothing: Smoothing,
) -> Result<Exp2Output> {
    let (phi, fixed_point) = solver.solve(phi1, u0, u1, cfg.threshold, cfg.max_iterations)?;
    let (det, at) = min_jacobian_det(&phi);
    if det < MIN_JACOBIAN_DET {
        return Err(Error::DegenerateDeformation { det, x: at[0], y: at[1] });
    }
    let image = image_update(u0, u1, phi1, &phi, smoothing)?;
    Ok(Exp2Output { image, phi, fixed_point })
}

/// One step of the discrete exponential map, `(U₀, U₁, Φ₁) ↦ (U₂, Φ₂)`.
pub fn exp2(
    u0: &Image,
    u1: &Image,
    phi1: &Deformation,
    p: &EnergyParams,
    cfg: &ShootingConfig,
) -> Result<Exp2Output> {
    cfg.validate()?;
    let solver = FixedPointSolver::new(phi1.level(), *p)?;
    step(&solver, u0, u1, phi1, cfg, cfg.smoothing_for(2))
}

/// Shoots `K` steps from `(U₀, U₁)`. `Φ₁` is registered once; afterwards every
/// step starts from the previous step's second deformation.
///
/// A failing step does not discard the earlier results: they are returned with
/// the failure recorded in [`ShootingResult::failure`].
pub fn exp_k(
    u0: &Image,
    u1: &Image,
    steps: usize,
    p: &EnergyParams,
    cfg: &ShootingConfig,
) -> Result<ShootingResult> {
    if steps == 0 {
        return Err(Error::InvalidArgument("at least one step is required".into()));
    }
    cfg.validate()?;
    let image_level = u0.level();
    let registration = register(u0, u1, p, &cfg.registration)?;
    let solver = FixedPointSolver::new(cfg.level(), *p)?;
    let mut images = vec![u0.clone(), u1.clone()];
    let mut deformations = vec![registration.phi.clone()];
    let mut diagnostics = Vec::new();
    let mut failure = None;
    for k in 2..=steps {
        let (prev, cur) = (&images[k - 2], &images[k - 1]);
        let phi1 = if cfg.reregister && k > 2 {
            match register(prev, cur, p, &cfg.registration) {
                Ok(r) => r.phi,
                Err(error) => {
                    failure = Some(StepFailure { index: k, error });
                    break;
                }
            }
        } else {
            deformations[k - 2].clone()
        };
        match step(&solver, prev, cur, &phi1, cfg, cfg.smoothing_for(k)) {
            Ok(out) => {
                let energy = matching_energy(cur, &out.image, &out.phi, p)?.total;
                log::info!(
                    "step {k}: {} fixed-point iterations, residual {:e}",
                    out.fixed_point.iterations,
                    out.fixed_point.residual
                );
                diagnostics.push(StepDiagnostics {
                    index: k,
                    min_det: min_jacobian_det(&out.phi).0,
                    fixed_point: out.fixed_point,
                    energy,
                });
                images.push(out.image);
                deformations.push(out.phi);
            }
            Err(error) => {
                log::error!("step {k} failed: {error}");
                failure = Some(StepFailure { index: k, error });
                break;
            }
        }
    }
    let velocities =
        deformations.iter().map(|phi| velocity_field(phi, steps, image_level)).collect();
    let modulations = images
        .windows(2)
        .zip(&deformations)
        .map(|(w, phi)| intensity_modulation(&w[0], &w[1], phi))
        .collect::<Result<_>>()?;
    Ok(ShootingResult {
        images,
        deformations,
        velocities,
        modulations,
        registration,
        steps: diagnostics,
        failure,
    })
}
