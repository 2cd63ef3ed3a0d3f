//! File formats, run configuration and the command-line pipeline drivers.

mod commands;
mod config;
mod image_io;
mod mdef;
mod viz;

use std::io::Write;
use std::path::Path;

pub use commands::{interpolate_command, register_command, shoot_command, synth_command, viz_command, Scene};
pub use config::RunConfig;
pub use image_io::{
    gray_from_image, image_from_gray, level_for_size, load_image, nearest_valid_side, quantize,
    save_dynamic, save_image,
};
pub use mdef::{decode_deformation, encode_deformation, load_deformation, save_deformation};
pub use viz::{color_field, direction_hue, hsv_to_rgb, modulation_map, velocity_viz};

use crate::error::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_SOLVER: i32 = 4;

/// Process exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) | Error::LevelMismatch(_) => EXIT_CONFIG,
        Error::Dimension { .. } | Error::Format(_) | Error::Io(_) | Error::Domain(..) => EXIT_INPUT,
        Error::NonConvergence { .. }
        | Error::SolverStalled { .. }
        | Error::NotSpd { .. }
        | Error::Singular(_)
        | Error::DegenerateDeformation { .. }
        | Error::Inversion(..) => EXIT_SOLVER,
    }
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> crate::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| Error::InvalidArgument(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    Ok(result?)
}
