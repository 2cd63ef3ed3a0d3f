//! Deterministic synthetic images and deformations for tests, examples and the
//! `synth` subcommand.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{Deformation, Image, Point};

/// Smooth step from 1 (inside) to 0 (outside) over a band of `width` around 0.
fn smooth_indicator(signed_distance: f64, width: f64) -> f64 {
    0.5 * (1.0 - (signed_distance / width).tanh())
}

/// A filled ellipse with a smooth rim.
#[derive(Debug, Clone, Copy)]
pub struct Ellipse {
    pub center: Point,
    pub radii: [f64; 2],
    /// Rotation angle in radians.
    pub angle: f64,
    pub intensity: f64,
    /// Optional linear shading across the ellipse along x.
    pub shading: f64,
}

impl Ellipse {
    fn value(&self, x: Point, edge: f64) -> f64 {
        let (s, c) = self.angle.sin_cos();
        let dx = x[0] - self.center[0];
        let dy = x[1] - self.center[1];
        let u = (c * dx + s * dy) / self.radii[0];
        let v = (-s * dx + c * dy) / self.radii[1];
        let r = (u * u + v * v).sqrt();
        // Approximate signed distance scaled by the mean radius.
        let dist = (r - 1.0) * 0.5 * (self.radii[0] + self.radii[1]);
        (self.intensity + self.shading * u) * smooth_indicator(dist, edge)
    }
}

/// Renders ellipses on a dark background; overlapping shapes add up.
pub fn render_ellipses(level: u32, ellipses: &[Ellipse], background: f64, edge: f64) -> Image {
    Image::from_fn(level, |x| {
        let v: f64 = ellipses.iter().map(|e| e.value(x, edge)).sum();
        (background + v).clamp(0.0, 1.0)
    })
}

/// Three ellipses of different intensities and a small variation of them: the
/// upper-left one moves down and grows, the upper-right one rotates slightly,
/// and the lower one shifts with a change of shading.
pub fn three_ellipses(level: u32) -> (Image, Image) {
    let edge = 0.03;
    let base = [
        Ellipse { center: [0.30, 0.30], radii: [0.14, 0.10], angle: 0.0, intensity: 0.9, shading: 0.0 },
        Ellipse { center: [0.70, 0.32], radii: [0.15, 0.08], angle: 0.5, intensity: 0.6, shading: 0.0 },
        Ellipse { center: [0.50, 0.70], radii: [0.18, 0.11], angle: 0.0, intensity: 0.4, shading: 0.05 },
    ];
    let mut moved = base;
    moved[0].center[1] += 0.01;
    moved[0].radii = [0.146, 0.105];
    moved[1].angle += 0.06;
    moved[2].center[0] += 0.01;
    moved[2].shading = 0.08;
    (render_ellipses(level, &base, 0.05, edge), render_ellipses(level, &moved, 0.05, edge))
}

/// Gaussian blob `background + amplitude exp(-|x-c|²/(2σ²))`.
pub fn gaussian_blob(level: u32, center: Point, sigma: f64, amplitude: f64, background: f64) -> Image {
    Image::from_fn(level, |x| {
        let d2 = (x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2);
        background + amplitude * (-d2 / (2.0 * sigma * sigma)).exp()
    })
}

/// Random smooth image with values in `[0, 1]`: a few Gaussian bumps.
pub fn random_smooth_image(level: u32, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bumps: Vec<(Point, f64, f64)> = (0..4)
        .map(|_| {
            (
                [0.2 + 0.6 * rng.gen::<f64>(), 0.2 + 0.6 * rng.gen::<f64>()],
                0.08 + 0.1 * rng.gen::<f64>(),
                0.2 + 0.3 * rng.gen::<f64>(),
            )
        })
        .collect();
    Image::from_fn(level, |x| {
        let v: f64 = bumps
            .iter()
            .map(|(c, s, a)| {
                let d2 = (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2);
                a * (-d2 / (2.0 * s * s)).exp()
            })
            .sum();
        (0.1 + v).clamp(0.0, 1.0)
    })
}

/// Image with independent uniform nodal values in `[0, 1]`.
pub fn random_image(level: u32, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = (1usize << level) + 1;
    Image::new(level, (0..side * side).map(|_| rng.gen()).collect()).expect("size matches level")
}

/// Deformation with independent uniform interior control displacements in
/// `[-amplitude, amplitude]`.
pub fn random_deformation(level: u32, amplitude: f64, seed: u64) -> Deformation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dofs: Vec<f64> = (0..Deformation::num_dofs(level))
        .map(|_| amplitude * (2.0 * rng.gen::<f64>() - 1.0))
        .collect();
    Deformation::from_dofs(level, &dofs).expect("size matches level")
}

/// Smooth displacement field `amplitude · b(x) · direction` interpolated into
/// the spline space, where `b` is a bump vanishing on the boundary.
pub fn smooth_bump_deformation(level: u32, amplitude: f64, direction: Point) -> Deformation {
    let n = 1usize << level;
    let h = 1.0 / n as f64;
    let nodal: Vec<Point> = (0..(n + 1) * (n + 1))
        .map(|k| {
            let x = (k % (n + 1)) as f64 * h;
            let y = (k / (n + 1)) as f64 * h;
            let b = bump(x) * bump(y);
            [amplitude * b * direction[0], amplitude * b * direction[1]]
        })
        .collect();
    Deformation::interpolate_nodal_displacements(level, &nodal).expect("size matches level")
}

/// `sin²(πt)`-type profile, zero with zero slope at both ends.
fn bump(t: f64) -> f64 {
    let s = (std::f64::consts::PI * t).sin();
    s * s
}
