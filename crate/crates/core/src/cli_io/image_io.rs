//! Grayscale image files (binary PGM and PNG) on the `2^M + 1` node grids.

use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, GrayImage, ImageFormat};

use super::write_atomic;
use crate::error::{Error, Result};
use crate::grid::Image;

fn format_of(path: &Path) -> Result<ImageFormat> {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("pgm") => Ok(ImageFormat::Pnm),
        Some("png") => Ok(ImageFormat::Png),
        _ => Err(Error::Format(format!("{}: expected a .pgm or .png file", path.display()))),
    }
}

/// Closest side length of the form `2^M + 1` with `M ≥ 1`.
pub fn nearest_valid_side(side: u32) -> u32 {
    let mut best = 3u32;
    for m in 1..31 {
        let s = (1u32 << m) + 1;
        if s.abs_diff(side) <= best.abs_diff(side) {
            best = s;
        }
    }
    best
}

/// Image level `M` for a `width × height` raster.
pub fn level_for_size(width: u32, height: u32) -> Result<u32> {
    let cells = width.wrapping_sub(1);
    if width != height || width < 3 || !cells.is_power_of_two() {
        return Err(Error::Dimension { width, height, nearest: nearest_valid_side(width.max(height)) });
    }
    Ok(cells.trailing_zeros())
}

/// Rows of the raster run along `y`, columns along `x`; pixel `(c, r)` is node
/// `(c, r)` and `k` maps to `k / 255`.
pub fn image_from_gray(gray: &GrayImage) -> Result<Image> {
    let level = level_for_size(gray.width(), gray.height())?;
    Image::new(level, gray.as_raw().iter().map(|&v| v as f64 / 255.0).collect())
}

/// Clamps to `[0, 1]` and quantizes by rounding half up.
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

pub fn gray_from_image(u: &Image) -> GrayImage {
    let side = u.side() as u32;
    GrayImage::from_raw(side, side, u.values().iter().map(|&v| quantize(v)).collect())
        .expect("image buffer matches its side length")
}

pub fn load_image(path: &Path) -> Result<Image> {
    let format = format_of(path)?;
    let bytes = std::fs::read(path)?;
    let decoded = image::load_from_memory_with_format(&bytes, format)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    match decoded {
        DynamicImage::ImageLuma8(gray) => image_from_gray(&gray),
        other => Err(Error::Format(format!(
            "{}: expected 8-bit grayscale, found {:?}",
            path.display(),
            other.color()
        ))),
    }
}

/// Encodes a raster in the format given by the extension of `path`.
pub fn save_dynamic(img: &DynamicImage, path: &Path) -> Result<()> {
    let format = format_of(path)?;
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, format).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    write_atomic(path, buf.get_ref())
}

pub fn save_image(u: &Image, path: &Path) -> Result<()> {
    save_dynamic(&DynamicImage::ImageLuma8(gray_from_image(u)), path)
}
