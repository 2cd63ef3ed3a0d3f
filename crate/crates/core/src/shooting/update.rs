use super::inverse::invert_deformation;
use crate::error::{Error, Result};
use crate::filtering::{anisotropic_smooth, FilterParams};
use crate::grid::{clamp_to_domain, Deformation, Image};

/// Where the diffusion filter acts in the image update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FilterTarget {
    /// The quotient `(U₁ − U₀∘Φ₁⁻¹) / det DΦ₁∘Φ₁⁻¹` before it is transported by `Φ₂⁻¹`.
    #[default]
    Quotient,
    /// The transported modulation `U₂ − U₁∘Φ₂⁻¹` after the update.
    Modulation,
}

/// Smoothing applied inside one image update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Smoothing {
    Off,
    On(FilterParams, FilterTarget),
}

/// Samples `u∘ψ` at the image nodes.
fn compose(u: &Image, psi: &Deformation) -> Image {
    u.map_nodes(|x, _| u.eval_unchecked(clamp_to_domain(psi.value_unchecked(x)).0))
}

/// `U₂ = J∘Φ₂⁻¹ + U₁∘Φ₂⁻¹` at the image nodes, with the modulation quotient
/// `J = (U₁ − U₀∘Φ₁⁻¹) / det DΦ₁∘Φ₁⁻¹`.
pub fn image_update(
    u0: &Image,
    u1: &Image,
    phi1: &Deformation,
    phi2: &Deformation,
    smoothing: Smoothing,
) -> Result<Image> {
    u0.check_same_level(u1)?;
    let inv1 = invert_deformation(phi1)?;
    let inv2 = invert_deformation(phi2)?;
    let mut failure = None;
    let mut quotient = u1.map_nodes(|x, v1| {
        let (z, _) = clamp_to_domain(inv1.value_unchecked(x));
        let det = phi1.value_jacobian_unchecked(z).1.det();
        if det <= 0.0 && failure.is_none() {
            failure = Some(Error::DegenerateDeformation { det, x: z[0], y: z[1] });
        }
        (v1 - u0.eval_unchecked(z)) / det
    });
    if let Some(e) = failure {
        return Err(e);
    }
    if let Smoothing::On(p, FilterTarget::Quotient) = smoothing {
        quotient = anisotropic_smooth(&quotient, &p)?;
    }
    let transported = compose(u1, &inv2);
    let modulation = compose(&quotient, &inv2);
    let modulation = match smoothing {
        Smoothing::On(p, FilterTarget::Modulation) => anisotropic_smooth(&modulation, &p)?,
        _ => modulation,
    };
    transported.zip_with(&modulation, |a, b| a + b)
}
