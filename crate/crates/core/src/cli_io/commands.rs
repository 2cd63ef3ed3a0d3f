//! The pipeline subcommands. Each reads its inputs, runs one library entry
//! point and writes all artifacts into the output directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use image::DynamicImage;

use super::config::RunConfig;
use super::image_io::{load_image, save_dynamic, save_image};
use super::mdef::{load_deformation, save_deformation};
use super::viz::{modulation_map, velocity_viz};
use super::write_atomic;
use crate::energy::min_jacobian_det;
use crate::error::{Error, Result};
use crate::grid::Image;
use crate::interpolation::interpolate;
use crate::registration::register;
use crate::shooting::{exp_k, intensity_modulation};
use crate::synthetic::{gaussian_blob, random_smooth_image, three_ellipses};

fn required<'a>(p: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    p.as_deref().ok_or_else(|| Error::Config(format!("no {what} given")))
}

/// Loads the two input images and derives the spline level.
fn inputs(cfg: &RunConfig) -> Result<(Image, Image, u32, PathBuf)> {
    cfg.validate()?;
    let out = required(&cfg.out, "output directory")?.to_path_buf();
    let u0 = load_image(required(&cfg.u0, "first image")?)?;
    let u1 = load_image(required(&cfg.u1, "second image")?)?;
    if u0.level() != u1.level() {
        return Err(Error::Dimension {
            width: u1.side() as u32,
            height: u1.side() as u32,
            nearest: u0.side() as u32,
        });
    }
    let level = cfg.spline_level_for(u0.level())?;
    std::fs::create_dir_all(&out)?;
    Ok((u0, u1, level, out))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes())
}

fn header(cfg: &RunConfig, command: &str, u0: &Image, level: u32) -> String {
    format!(
        "command: {command}\nimage level M = {}, spline level N = {level}\ngamma = {}, delta = {}\n",
        u0.level(),
        cfg.energy.gamma,
        cfg.energy.delta
    )
}

/// Registers `u1` to `u0`; writes `phi.mdef`, the warped second image and the
/// energy history.
pub fn register_command(cfg: &RunConfig) -> Result<()> {
    let (u0, u1, level, out) = inputs(cfg)?;
    let res = register(&u0, &u1, &cfg.energy, &cfg.registration_config(level))?;
    save_deformation(&res.phi, &out.join("phi.mdef"))?;
    let warped = intensity_modulation(&u0, &u1, &res.phi)?.zip_with(&u0, |a, b| a + b)?;
    save_image(&warped, &out.join(format!("u1_warped.{}", cfg.image_format)))?;
    let mut log = header(cfg, "register", &u0, level);
    let _ = writeln!(
        log,
        "identity energy {:.10e}\nfinal energy {:.10e} (regularizer {:.10e}, matching {:.10e})",
        res.identity_energy, res.energy.total, res.energy.regularizer, res.energy.matching
    );
    let _ = writeln!(log, "iterations per level {:?}, converged {}", res.iterations, res.converged);
    let _ = writeln!(log, "min det {:.6}", min_jacobian_det(&res.phi).0);
    for (i, e) in res.history.iter().enumerate() {
        let _ = writeln!(log, "{i} {e:.12e}");
    }
    write_text(&out.join("energy.log"), &log)
}

/// Shoots `cfg.steps` steps from `(u0, u1)` and writes images, deformations,
/// modulation maps, velocity images and `report.txt`. On a failing step the
/// outputs up to that step are still written and the error is returned.
pub fn shoot_command(cfg: &RunConfig) -> Result<()> {
    let (u0, u1, level, out) = inputs(cfg)?;
    let k = cfg.steps;
    let res = exp_k(&u0, &u1, k, &cfg.energy, &cfg.shooting_config(level))?;
    let ext = &cfg.image_format;
    for (i, img) in res.images.iter().enumerate() {
        save_image(img, &out.join(format!("u_{i:02}.{ext}")))?;
    }
    for (i, phi) in res.deformations.iter().enumerate() {
        let i = i + 1;
        save_deformation(phi, &out.join(format!("phi_{i:02}.mdef")))?;
        if cfg.viz_velocity {
            let rgb = DynamicImage::ImageRgb8(velocity_viz(phi, k, u0.level()));
            save_dynamic(&rgb, &out.join(format!("velocity_{i:02}.png")))?;
        }
    }
    if cfg.viz_modulation {
        for (i, m) in res.modulations.iter().enumerate() {
            let i = i + 1;
            let (map, bound) = modulation_map(m);
            save_image(&map, &out.join(format!("modulation_{i:02}.{ext}")))?;
            write_text(
                &out.join(format!("modulation_{i:02}.txt")),
                &format!("# gray 0 and 1 correspond to -bound and +bound\nbound = {bound:.10e}\n"),
            )?;
        }
    }
    let mut report = header(cfg, "shoot", &u0, level);
    let reg = &res.registration;
    let _ = writeln!(report, "steps K = {k}");
    let _ = writeln!(
        report,
        "registration of u_01: energy {:.10e} (identity {:.10e}), iterations {:?}, converged {}",
        reg.energy.total, reg.identity_energy, reg.iterations, reg.converged
    );
    let _ = writeln!(report, "step iterations last_difference residual min_det energy");
    for s in &res.steps {
        let _ = writeln!(
            report,
            "{} {} {:.3e} {:.3e} {:.6} {:.10e}",
            s.index,
            s.fixed_point.iterations,
            s.fixed_point.final_difference(),
            s.fixed_point.residual,
            s.min_det,
            s.energy
        );
    }
    match res.failure {
        Some(f) => {
            let _ = writeln!(report, "failed at step {}: {}", f.index, f.error);
            write_text(&out.join("report.txt"), &report)?;
            Err(f.error)
        }
        None => {
            let _ = writeln!(report, "completed");
            write_text(&out.join("report.txt"), &report)
        }
    }
}

/// Computes a discrete geodesic from `u0` to `u1` with `cfg.segments` segments.
pub fn interpolate_command(cfg: &RunConfig) -> Result<()> {
    let (u0, uk, level, out) = inputs(cfg)?;
    let res = interpolate(&u0, &uk, &cfg.energy, &cfg.interpolation_config(level))?;
    for (i, img) in res.images.iter().enumerate() {
        save_image(img, &out.join(format!("u_{i:02}.{}", cfg.image_format)))?;
    }
    for (i, phi) in res.deformations.iter().enumerate() {
        save_deformation(phi, &out.join(format!("phi_{:02}.mdef", i + 1)))?;
    }
    let mut log = header(cfg, "interpolate", &u0, level);
    let _ = writeln!(
        log,
        "segments K = {}, iterations per level {:?}, converged {}",
        cfg.segments, res.iterations, res.converged
    );
    for (i, e) in res.energies.iter().enumerate() {
        let _ = writeln!(log, "{i} {e:.12e}");
    }
    write_text(&out.join("energy.log"), &log)
}

/// Renders `steps · (Φ − Id)` from a deformation file. The sampling grid has
/// level `image_level`, by default one above the spline level.
pub fn viz_command(phi: &Path, out: &Path, steps: usize, image_level: Option<u32>) -> Result<()> {
    let phi = load_deformation(phi)?;
    let m = image_level.unwrap_or(phi.level() + 1);
    if m > 14 {
        return Err(Error::Config(format!("image level {m} is too large")));
    }
    save_dynamic(&DynamicImage::ImageRgb8(velocity_viz(&phi, steps, m)), out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scene {
    /// Three ellipses that move and change brightness.
    Ellipses,
    /// Two Gaussian blobs of different position, width and height.
    Blobs,
    /// Two independent smooth random images.
    Random,
}

/// Writes a synthetic image pair `u0`, `u1` of level `level` into `out`.
pub fn synth_command(scene: Scene, level: u32, seed: u64, out: &Path, format: &str) -> Result<()> {
    if !(2..=12).contains(&level) {
        return Err(Error::Config(format!("image level {level} is not in 2..=12")));
    }
    let (a, b) = match scene {
        Scene::Ellipses => three_ellipses(level),
        Scene::Blobs => (
            gaussian_blob(level, [0.42, 0.46], 0.09, 0.6, 0.1),
            gaussian_blob(level, [0.56, 0.54], 0.11, 0.75, 0.1),
        ),
        Scene::Random => (random_smooth_image(level, seed), random_smooth_image(level, seed + 1)),
    };
    std::fs::create_dir_all(out)?;
    save_image(&a, &out.join(format!("u0.{format}")))?;
    save_image(&b, &out.join(format!("u1.{format}")))
}
