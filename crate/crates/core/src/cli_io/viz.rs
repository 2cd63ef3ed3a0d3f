//! Color coding of velocity fields and gray coding of signed modulations.

use image::{Rgb, RgbImage};

use crate::grid::{Deformation, Image, Point};
use crate::shooting::velocity_field;

/// HSV with `h` in degrees, `s` and `v` in `[0, 1]`.
pub fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [f64; 3] {
    let h = h.rem_euclid(360.0) / 60.0;
    let c = v * s;
    let x = c * (1.0 - (h % 2.0 - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r + m, g + m, b + m]
}

/// Hue of a vector in `[0°, 360°)`.
pub fn direction_hue(v: Point) -> f64 {
    v[1].atan2(v[0]).to_degrees().rem_euclid(360.0)
}

/// Colors a sampled vector field: hue is the direction, value the norm
/// relative to the largest norm.
pub fn color_field(side: usize, field: &[Point]) -> RgbImage {
    let norm = |v: &Point| v[0].hypot(v[1]);
    let max = field.iter().map(norm).fold(0.0, f64::max);
    RgbImage::from_fn(side as u32, side as u32, |c, r| {
        let v = field[r as usize * side + c as usize];
        let value = if max < 1e-12 { 0.0 } else { norm(&v) / max };
        let rgb = hsv_to_rgb(direction_hue(v), 1.0, value);
        Rgb(rgb.map(|t| (t.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8))
    })
}

/// `K (Φ − Id)` on the nodes of the image grid of level `image_level`.
pub fn velocity_viz(phi: &Deformation, steps: usize, image_level: u32) -> RgbImage {
    let side = (1usize << image_level) + 1;
    color_field(side, &velocity_field(phi, steps, image_level))
}

/// Maps a signed field to gray values symmetric about 0.5. Returns the map
/// and the bound `max |I|` that corresponds to black and white.
pub fn modulation_map(modulation: &Image) -> (Image, f64) {
    let bound = modulation.values().iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    let scale = if bound < 1e-12 { 0.0 } else { 0.5 / bound };
    (modulation.map_nodes(|_, v| 0.5 + scale * v), bound)
}
