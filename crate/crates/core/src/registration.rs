//! Minimization of the matching energy over spline deformations by a multilevel
//! Fletcher–Reeves conjugate gradient descent with Armijo backtracking.

use crate::energy::{
    check_levels, matching_energy, matching_energy_grad_on, matching_energy_on, min_jacobian_det_on,
    EnergyBreakdown, EnergyParams,
};
use crate::error::{Error, Result};
use crate::grid::{prolong_deformation, Deformation, Image};
use crate::linalg::{dot, max_abs};
use crate::shooting::MIN_JACOBIAN_DET;

/// Jacobian bound enforced on accepted iterates. The small margin over
/// [`MIN_JACOBIAN_DET`] absorbs the rounding of level prolongation, so results
/// keep `det DΦ ≥ MIN_JACOBIAN_DET`.
pub(crate) const DESCENT_MIN_DET: f64 = MIN_JACOBIAN_DET * (1.0 + 1e-9);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegistrationConfig {
    /// Coarsest spline level of the multilevel schedule.
    pub coarsest_level: u32,
    /// Spline level of the result.
    pub level: u32,
    /// Iteration cap per level.
    pub max_iterations: usize,
    /// Armijo sufficient decrease factor.
    pub armijo_c1: f64,
    /// Step reduction factor of the backtracking.
    pub backtrack: f64,
    /// Stop once the sup-norm of the control-point gradient is below this.
    pub gradient_tolerance: f64,
    /// Reset to steepest descent every this many iterations.
    pub restart_period: usize,
}

impl RegistrationConfig {
    pub fn new(level: u32) -> Self {
        RegistrationConfig {
            coarsest_level: 3,
            level,
            max_iterations: 500,
            armijo_c1: 1e-4,
            backtrack: 0.5,
            gradient_tolerance: 1e-8,
            restart_period: 20,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.level == 0 {
            return bad("spline level must be at least 1".into());
        }
        if !(self.armijo_c1 > 0.0 && self.armijo_c1 < 0.5) {
            return bad(format!("armijo_c1 = {} is not in (0, 0.5)", self.armijo_c1));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return bad(format!("backtrack = {} is not in (0, 1)", self.backtrack));
        }
        if !(self.gradient_tolerance > 0.0) || self.restart_period == 0 {
            return bad("gradient tolerance and restart period must be positive".into());
        }
        Ok(())
    }

    pub(crate) fn first_level(&self) -> u32 {
        self.coarsest_level.clamp(1, self.level)
    }
}

#[derive(Debug, Clone)]
pub struct RegistrationResult {
    pub phi: Deformation,
    pub energy: EnergyBreakdown,
    /// `W[u0, u1, Id]`, the bound the result never exceeds.
    pub identity_energy: f64,
    /// Accepted iterations per level, coarse to fine.
    pub iterations: Vec<usize>,
    /// Energies of all accepted iterates, starting with the initial guess.
    pub history: Vec<f64>,
    /// Whether the gradient tolerance was reached on the finest level.
    pub converged: bool,
}

/// A smooth objective over spline unknowns with an admissibility guard.
pub(crate) trait Objective {
    /// Spline level of the unknowns; sets the length scale of the first step.
    fn level(&self) -> u32;
    /// Value at an admissible point, `None` if the point is rejected.
    fn energy(&self, x: &[f64]) -> Result<Option<f64>>;
    /// Value without the admissibility check.
    fn unguarded_energy(&self, x: &[f64]) -> Result<f64>;
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>>;
    /// Error reported when the starting point is rejected.
    fn rejection(&self, x: &[f64]) -> Error;
    /// Extra stopping rule on the energies of the accepted iterates.
    fn settled(&self, _history: &[f64]) -> bool {
        false
    }
}

struct Problem<'a> {
    u0: &'a Image,
    u1: &'a Image,
    p: &'a EnergyParams,
    level: u32,
    /// Spline level whose quadrature integrates the regularizer and checks the
    /// Jacobian, the finest level of the schedule.
    target: u32,
}

impl Objective for Problem<'_> {
    fn level(&self) -> u32 {
        self.level
    }

    /// `None` if the Jacobian guard fails.
    fn energy(&self, dofs: &[f64]) -> Result<Option<f64>> {
        let phi = Deformation::from_dofs(self.level, dofs)?;
        if min_jacobian_det_on(&phi, self.target).0 < DESCENT_MIN_DET {
            return Ok(None);
        }
        Ok(Some(matching_energy_on(self.u0, self.u1, &phi, self.p, self.target)?.total))
    }

    fn unguarded_energy(&self, dofs: &[f64]) -> Result<f64> {
        let phi = Deformation::from_dofs(self.level, dofs)?;
        Ok(matching_energy_on(self.u0, self.u1, &phi, self.p, self.target)?.total)
    }

    fn gradient(&self, dofs: &[f64]) -> Result<Vec<f64>> {
        let phi = Deformation::from_dofs(self.level, dofs)?;
        matching_energy_grad_on(self.u0, self.u1, &phi, self.p, self.target)
    }

    fn rejection(&self, dofs: &[f64]) -> Error {
        match Deformation::from_dofs(self.level, dofs) {
            Ok(phi) => {
                let (det, at) = min_jacobian_det_on(&phi, self.target);
                Error::DegenerateDeformation { det, x: at[0], y: at[1] }
            }
            Err(e) => e,
        }
    }
}

/// Backtracking along `dir` from `x`; returns the accepted point, energy and step.
fn line_search<O: Objective>(
    prob: &O,
    cfg: &RegistrationConfig,
    x: &[f64],
    f: f64,
    slope: f64,
    dir: &[f64],
    initial: f64,
) -> Result<Option<(Vec<f64>, f64, f64)>> {
    let mut alpha = initial;
    for _ in 0..60 {
        let trial: Vec<f64> = x.iter().zip(dir).map(|(a, d)| a + alpha * d).collect();
        if let Some(ft) = prob.energy(&trial)? {
            if ft <= f + cfg.armijo_c1 * alpha * slope {
                return Ok(Some((trial, ft, alpha)));
            }
        }
        alpha *= cfg.backtrack;
    }
    Ok(None)
}

/// Fletcher–Reeves descent at a single level. Returns the iterate, the number
/// of accepted steps and whether the gradient tolerance was met.
///
/// A `trusted` start is the prolongation of an accepted coarse iterate. Its
/// Jacobian may miss the guard by rounding, so it is not checked again.
pub(crate) fn descend<O: Objective>(
    prob: &O,
    cfg: &RegistrationConfig,
    start: Vec<f64>,
    trusted: bool,
    history: &mut Vec<f64>,
) -> Result<(Vec<f64>, usize, bool)> {
    let mut x = start;
    let mut f = match prob.energy(&x)? {
        Some(f) => f,
        None if trusted => prob.unguarded_energy(&x)?,
        None => return Err(prob.rejection(&x)),
    };
    // After an exact prolongation the energy only changes by rounding.
    if history.last().map_or(true, |&l| (l - f).abs() > 1e-12 * f.abs()) {
        history.push(f);
    }
    let mut g = prob.gradient(&x)?;
    if max_abs(&g) < cfg.gradient_tolerance {
        return Ok((x, 0, true));
    }
    let h = 1.0 / (1u64 << prob.level()) as f64;
    let mut dir: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut step = 0.1 * h / max_abs(&dir);
    let mut since_restart = 0;
    for it in 0..cfg.max_iterations {
        let mut slope = dot(&g, &dir);
        let mut steepest = since_restart == 0;
        if slope >= 0.0 || since_restart >= cfg.restart_period {
            dir = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
            steepest = true;
            since_restart = 0;
        }
        let mut found = line_search(prob, cfg, &x, f, slope, &dir, step)?;
        if found.is_none() && !steepest {
            dir = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
            since_restart = 0;
            found = line_search(prob, cfg, &x, f, slope, &dir, 0.1 * h / max_abs(&dir))?;
        }
        let Some((xn, fn_, alpha)) = found else {
            log::debug!("line search failed at level {} after {it} iterations", prob.level());
            return Ok((x, it, false));
        };
        step = 2.0 * alpha;
        let gn = prob.gradient(&xn)?;
        let beta = dot(&gn, &gn) / dot(&g, &g);
        for (d, v) in dir.iter_mut().zip(&gn) {
            *d = -v + beta * *d;
        }
        x = xn;
        f = fn_;
        g = gn;
        history.push(f);
        since_restart += 1;
        if max_abs(&g) < cfg.gradient_tolerance || prob.settled(history) {
            return Ok((x, it + 1, true));
        }
    }
    Ok((x, cfg.max_iterations, false))
}

fn finish(
    u0: &Image,
    u1: &Image,
    p: &EnergyParams,
    phi: Deformation,
    iterations: Vec<usize>,
    history: Vec<f64>,
    converged: bool,
) -> Result<RegistrationResult> {
    let energy = matching_energy(u0, u1, &phi, p)?;
    let identity_energy = matching_energy(u0, u1, &Deformation::identity(phi.level()), p)?.total;
    if !converged {
        log::warn!("registration stopped before reaching the gradient tolerance");
    }
    Ok(RegistrationResult { phi, energy, identity_energy, iterations, history, converged })
}

/// Minimizes `W[u0, u1, ·]` starting from the identity on the coarsest level
/// and prolongating each level's minimizer to the next.
///
/// Every level works on the full resolution images. The returned deformation
/// never has a larger energy than the identity.
pub fn register(
    u0: &Image,
    u1: &Image,
    p: &EnergyParams,
    cfg: &RegistrationConfig,
) -> Result<RegistrationResult> {
    cfg.validate()?;
    check_levels(u0, u1, &Deformation::identity(cfg.level))?;
    let mut phi = Deformation::identity(cfg.first_level());
    let mut iterations = Vec::new();
    let mut history = Vec::new();
    let mut converged;
    loop {
        let level = phi.level();
        let prob = Problem { u0, u1, p, level, target: cfg.level };
        let trusted = level > cfg.first_level();
        let (next, its, conv) = descend(&prob, cfg, phi.dofs(), trusted, &mut history)?;
        iterations.push(its);
        converged = conv;
        phi = Deformation::from_dofs(level, &next)?;
        if phi.level() >= cfg.level {
            break;
        }
        phi = prolong_deformation(&phi);
    }
    finish(u0, u1, p, phi, iterations, history, converged)
}

/// Single-level descent from a given deformation (warm start).
pub fn register_from(
    u0: &Image,
    u1: &Image,
    start: &Deformation,
    p: &EnergyParams,
    cfg: &RegistrationConfig,
) -> Result<RegistrationResult> {
    cfg.validate()?;
    check_levels(u0, u1, start)?;
    let prob = Problem { u0, u1, p, level: start.level(), target: start.level() };
    let mut history = Vec::new();
    let (x, its, conv) = descend(&prob, cfg, start.dofs(), false, &mut history)?;
    finish(u0, u1, p, Deformation::from_dofs(start.level(), &x)?, vec![its], history, conv)
}
