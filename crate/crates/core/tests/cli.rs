use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use image::{GrayImage, Luma};
use metamorph::cli_io::{
    decode_deformation, encode_deformation, exit_code, load_deformation, load_image, save_image, velocity_viz,
    RunConfig, EXIT_CONFIG, EXIT_INPUT, EXIT_SOLVER,
};
use metamorph::grid::Deformation;
use metamorph::synthetic::{random_deformation, random_image};
use metamorph::Error;
use proptest::prelude::*;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_metamorph"))
}

fn run(args: &[&str]) -> (i32, String) {
    let out = bin().args(args).output().unwrap();
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_constant_pgm(path: &Path, side: u32, value: u8) {
    GrayImage::from_pixel(side, side, Luma([value])).save(path).unwrap();
}

#[test]
fn image_round_trip_is_within_half_a_gray_level() {
    let dir = TempDir::new().unwrap();
    let u = random_image(5, 3);
    for ext in ["pgm", "png"] {
        let path = dir.path().join(format!("u.{ext}"));
        save_image(&u, &path).unwrap();
        let back = load_image(&path).unwrap();
        assert!(back.max_abs_diff(&u) <= 1.0 / 510.0 + 1e-15, "{ext}");
    }
}

#[test]
fn black_and_white_pgm() {
    let dir = TempDir::new().unwrap();
    let black = dir.path().join("black.pgm");
    let white = dir.path().join("white.pgm");
    write_constant_pgm(&black, 257, 0);
    write_constant_pgm(&white, 257, 255);
    let b = load_image(&black).unwrap();
    assert_eq!(b.level(), 8);
    assert!(b.values().iter().all(|&v| v == 0.0));
    assert!(load_image(&white).unwrap().values().iter().all(|&v| v == 1.0));
}

#[test]
fn wrong_sizes_are_rejected() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("odd.pgm");
    write_constant_pgm(&path, 256, 10);
    match load_image(&path) {
        Err(e @ Error::Dimension { nearest: 257, .. }) => assert_eq!(exit_code(&e), EXIT_INPUT),
        other => panic!("expected a dimension error, got {other:?}"),
    }
    let rect = dir.path().join("rect.png");
    GrayImage::new(33, 17).save(&rect).unwrap();
    assert!(matches!(load_image(&rect), Err(Error::Dimension { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn deformation_files_round_trip_bit_exactly(seed in any::<u64>(), level in 1u32..5, amp in 0.0..0.05f64) {
        let phi = random_deformation(level, amp, seed);
        let bytes = encode_deformation(&phi);
        let back = decode_deformation(&bytes).unwrap();
        prop_assert_eq!(&back, &phi);
        prop_assert_eq!(encode_deformation(&back), bytes);
    }

    #[test]
    fn config_round_trip(
        steps in 1usize..50,
        gamma in 1e-6..1e-2f64,
        tau in 0.0..1e-2f64,
        smoothing in any::<bool>(),
        level in proptest::option::of(2u32..9),
        seed in any::<u64>(),
    ) {
        let mut cfg = RunConfig::default();
        cfg.steps = steps;
        cfg.energy.gamma = gamma;
        cfg.shooting.tau0 = tau;
        cfg.shooting.smoothing = smoothing;
        cfg.spline_level = level;
        cfg.seed = seed;
        cfg.out = Some(PathBuf::from("some dir/out"));
        let text = cfg.serialize();
        let parsed = RunConfig::parse(&text).unwrap();
        prop_assert_eq!(&parsed, &cfg);
        prop_assert_eq!(parsed.serialize(), text);
    }
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let (code, _) = run(&["shoot", "--bogus"]);
    assert_eq!(code, EXIT_CONFIG);
    let (code, err) = run(&["shoot", "--u0", "missing.pgm", "--u1", "missing.pgm", "--out", s(d)]);
    assert_eq!(code, EXIT_INPUT, "{err}");
    let (code, err) = run(&["shoot", "--set", "shooting.beta=2", "--out", s(d)]);
    assert_eq!(code, EXIT_CONFIG, "{err}");
    let (code, _) = run(&["shoot", "--set", "nonsense=1"]);
    assert_eq!(code, EXIT_CONFIG);

    let a = d.join("a.pgm");
    let b = d.join("b.pgm");
    write_constant_pgm(&a, 17, 0);
    write_constant_pgm(&b, 33, 0);
    let (code, _) = run(&["register", "--u0", s(&a), "--u1", s(&b), "--out", s(&d.join("r"))]);
    assert_eq!(code, EXIT_INPUT);

    // A one-iteration cap cannot reach the fixed-point threshold.
    let (u0, u1) = (d.join("u0.pgm"), d.join("u1.pgm"));
    let (code, _) = run(&["synth", "--scene", "blobs", "--level", "5", "--format", "pgm", "--out", s(d)]);
    assert_eq!(code, 0);
    let out = d.join("capped");
    let (code, err) = run(&[
        "shoot", "--u0", s(&u0), "--u1", s(&u1), "--steps", "3", "--out", s(&out), "--set", "shooting.max_iterations=1",
    ]);
    assert_eq!(code, EXIT_SOLVER, "{err}");
    let report = fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.contains("failed at step 2"), "{report}");
    assert!(out.join("u_01.png").exists());
}

#[test]
fn shoot_constants() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let (a, b) = (d.join("a.pgm"), d.join("b.pgm"));
    // Gray levels 40 and 60: every step of the progression is a whole level.
    write_constant_pgm(&a, 33, 40);
    write_constant_pgm(&b, 33, 60);
    let out = d.join("out");
    let (code, err) = run(&["shoot", "--u0", s(&a), "--u1", s(&b), "--steps", "4", "--out", s(&out), "--set", "image_format=pgm"]);
    assert_eq!(code, 0, "{err}");
    for k in 0..=4 {
        let img = load_image(&out.join(format!("u_{k:02}.pgm"))).unwrap();
        let want = (40 + 20 * k) as f64 / 255.0;
        assert!(img.values().iter().all(|&v| (v - want).abs() < 1e-12), "u_{k:02}");
    }
    for k in 1..=4 {
        assert!(load_deformation(&out.join(format!("phi_{k:02}.mdef"))).unwrap().max_displacement() < 1e-10);
        assert!(out.join(format!("modulation_{k:02}.txt")).exists());
    }
    assert!(fs::read_to_string(out.join("report.txt")).unwrap().contains("completed"));
}

#[test]
fn shoot_identical_images() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let a = d.join("a.png");
    let u = metamorph::synthetic::random_smooth_image(5, 1);
    save_image(&u, &a).unwrap();
    let out = d.join("out");
    let (code, err) = run(&["shoot", "--u0", s(&a), "--u1", s(&a), "--steps", "3", "--out", s(&out)]);
    assert_eq!(code, 0, "{err}");
    let u = load_image(&a).unwrap();
    for k in 0..=3 {
        assert_eq!(load_image(&out.join(format!("u_{k:02}.png"))).unwrap(), u);
    }
    for k in 1..=3 {
        let v = image::open(out.join(format!("velocity_{k:02}.png"))).unwrap().to_rgb8();
        assert!(v.pixels().all(|p| p.0 == [0, 0, 0]));
    }
}

#[test]
fn register_identical_images() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let a = d.join("a.pgm");
    save_image(&metamorph::synthetic::random_smooth_image(5, 4), &a).unwrap();
    let out = d.join("out");
    let (code, err) = run(&["register", "--u0", s(&a), "--u1", s(&a), "--out", s(&out)]);
    assert_eq!(code, 0, "{err}");
    let phi = load_deformation(&out.join("phi.mdef")).unwrap();
    assert_eq!(phi, Deformation::identity(4));
    assert!(out.join("energy.log").exists() && out.join("u1_warped.png").exists());
}

#[test]
fn interpolate_constants() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let (a, b) = (d.join("a.pgm"), d.join("b.pgm"));
    write_constant_pgm(&a, 17, 40);
    write_constant_pgm(&b, 17, 200);
    let out = d.join("out");
    let (code, err) = run(&[
        "interpolate", "--u0", s(&a), "--uK", s(&b), "--segments", "4", "--out", s(&out), "--set", "image_format=pgm",
    ]);
    assert_eq!(code, 0, "{err}");
    for k in 0..=4 {
        let img = load_image(&out.join(format!("u_{k:02}.pgm"))).unwrap();
        let want = (40 + 40 * k) as f64 / 255.0;
        assert!(img.values().iter().all(|&v| (v - want).abs() < 1e-12), "u_{k:02}");
    }
}

#[test]
fn interpolate_then_shoot() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let (code, _) = run(&["synth", "--scene", "blobs", "--level", "5", "--out", s(d)]);
    assert_eq!(code, 0);
    let geo = d.join("geo");
    let (code, err) = run(&[
        "interpolate", "--u0", s(&d.join("u0.png")), "--uK", s(&d.join("u1.png")), "--segments", "4", "--out", s(&geo),
    ]);
    assert_eq!(code, 0, "{err}");
    let shot = d.join("shot");
    let (code, err) = run(&[
        "shoot", "--u0", s(&geo.join("u_00.png")), "--u1", s(&geo.join("u_01.png")), "--steps", "3", "--out", s(&shot),
    ]);
    assert_eq!(code, 0, "{err}");
    for k in 2..=3 {
        let a = load_image(&geo.join(format!("u_{k:02}.png"))).unwrap();
        let b = load_image(&shot.join(format!("u_{k:02}.png"))).unwrap();
        let err = a.zip_with(&b, |x, y| x - y).unwrap().l2_norm();
        assert!(err < 5e-2, "u_{k:02}: {err:e}");
    }
}

#[test]
fn swirl_hue_cycles_once() {
    // Displacement field rotating around the center, interpolated into the spline space.
    let level = 4;
    let n = 1usize << level;
    let nodal: Vec<[f64; 2]> = (0..(n + 1) * (n + 1))
        .map(|k| {
            let x = (k % (n + 1)) as f64 / n as f64 - 0.5;
            let y = (k / (n + 1)) as f64 / n as f64 - 0.5;
            let r2 = x * x + y * y;
            let w = 0.02 * (-r2 / 0.02).exp();
            [-w * y, w * x]
        })
        .collect();
    let phi = Deformation::interpolate_nodal_displacements(level, &nodal).unwrap();
    let img = velocity_viz(&phi, 1, 6);
    let side = img.width() as f64;
    let mut hues = Vec::new();
    for a in 0..8 {
        let t = a as f64 * std::f64::consts::FRAC_PI_4;
        let (px, py) = (0.5 + 0.15 * t.cos(), 0.5 + 0.15 * t.sin());
        let p = img.get_pixel(((side - 1.0) * px).round() as u32, ((side - 1.0) * py).round() as u32).0;
        hues.push(hue_of(p));
    }
    // The velocity at angle t points along t + 90°, so the hue follows t.
    let mut total = 0.0;
    for a in 0..8 {
        let mut step = hues[(a + 1) % 8] - hues[a];
        if step < -180.0 {
            step += 360.0;
        }
        if step > 180.0 {
            step -= 360.0;
        }
        assert!((step - 45.0).abs() < 10.0, "hues {hues:?}");
        total += step;
    }
    assert!((total - 360.0).abs() < 1e-9);
}

fn hue_of(p: [u8; 3]) -> f64 {
    let [r, g, b] = p.map(|c| c as f64);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let c = max - min;
    let h = if max == r {
        ((g - b) / c).rem_euclid(6.0)
    } else if max == g {
        (b - r) / c + 2.0
    } else {
        (r - g) / c + 4.0
    };
    60.0 * h
}

/// FNV-1a digest of a file's bytes.
fn digest(path: &Path) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in fs::read(path).unwrap() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}

/// Shoots the three-ellipse scene at N = 6, M = 7 and compares the emitted
/// images with the digests in `tests/golden/`. A missing golden file is
/// written from the current run.
#[test]
fn three_ellipses_golden() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let (code, _) = run(&["synth", "--scene", "ellipses", "--level", "7", "--format", "pgm", "--out", s(d)]);
    assert_eq!(code, 0);
    let out = d.join("out");
    let steps = 6;
    let (code, err) = run(&[
        "shoot", "--u0", s(&d.join("u0.pgm")), "--u1", s(&d.join("u1.pgm")), "--steps", &steps.to_string(),
        "--spline-level", "6", "--set", "image_format=pgm", "--out", s(&out),
    ]);
    assert_eq!(code, 0, "{err}");
    let report = fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.contains("completed"), "{report}");
    let mut lines = String::new();
    for k in 0..=steps {
        let name = format!("u_{k:02}.pgm");
        lines.push_str(&format!("{name} {}\n", digest(&out.join(&name))));
    }
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/three_ellipses_n6_m7.txt");
    match fs::read_to_string(&golden) {
        Ok(expected) => assert_eq!(lines, expected, "outputs differ from {}", golden.display()),
        Err(_) => {
            fs::create_dir_all(golden.parent().unwrap()).unwrap();
            fs::write(&golden, &lines).unwrap();
            eprintln!("wrote {}", golden.display());
        }
    }
}
