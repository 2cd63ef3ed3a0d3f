use metamorph::energy::EnergyParams;
use metamorph::grid::{Deformation, Image};
use metamorph::interpolation::{interpolate, InterpolationConfig};
use metamorph::registration::{register, RegistrationConfig};
use metamorph::shooting::{exp2, exp_k, fixed_point_solve, invert_deformation, ShootingConfig};
use metamorph::synthetic::{gaussian_blob, random_smooth_image, smooth_bump_deformation, three_ellipses};

fn l2_diff(a: &Image, b: &Image) -> f64 {
    a.zip_with(b, |x, y| x - y).unwrap().l2_norm()
}

/// `u ∘ ψ` sampled at the nodes.
fn compose(u: &Image, psi: &Deformation) -> Image {
    u.map_nodes(|x, _| u.eval(psi.eval(x).unwrap()).unwrap())
}

fn assert_contracting_after_three(differences: &[f64], what: &str) {
    for (j, w) in differences.windows(2).enumerate().skip(3) {
        assert!(w[1] < w[0], "{what}: difference {} = {:e} after {:e}", j + 1, w[1], w[0]);
    }
}

#[test]
fn blob_translation_fixed_point() {
    let p = EnergyParams::default();
    let u0 = gaussian_blob(6, [0.44, 0.5], 0.1, 0.6, 0.1);
    let u1 = gaussian_blob(6, [0.5, 0.5], 0.1, 0.6, 0.1);
    let reg = register(&u0, &u1, &p, &RegistrationConfig::new(5)).unwrap();
    let (phi2, diag) = fixed_point_solve(&reg.phi, &u0, &u1, &p, 1e-12, 200).unwrap();
    assert!(diag.residual < 1e-8, "residual {:e}", diag.residual);
    assert!(diag.iterations >= 10 && diag.final_difference() < 1e-12);
    let tail = &diag.differences[diag.differences.len() - 10..];
    assert!(tail.windows(2).all(|w| w[1] < w[0]), "{tail:?}");
    // Geometric: the mean ratio over the last ten stays well below one.
    let rate = (tail[9] / tail[0]).powf(1.0 / 9.0);
    assert!(rate < 0.9, "rate {rate}");
    assert_contracting_after_three(&diag.differences, "blob");
    // The second step keeps moving the blob to the right.
    let c = phi2.eval([0.5, 0.5]).unwrap();
    assert!(c[0] > 0.5);
}

#[test]
fn ellipses_contract_after_three_iterations() {
    let p = EnergyParams::default();
    let (u0, u1) = three_ellipses(6);
    let mut cfg = ShootingConfig::new(5);
    cfg.smoothing = false;
    let res = exp_k(&u0, &u1, 3, &p, &cfg).unwrap();
    assert!(res.failure.is_none());
    for s in &res.steps {
        assert_contracting_after_three(&s.fixed_point.differences, &format!("step {}", s.index));
        assert!(s.min_det >= 0.1);
    }
}

#[test]
fn near_translation_inverse() {
    for level in [4u32, 5] {
        let phi = smooth_bump_deformation(level, 0.02, [1.0, 0.0]);
        let inv = invert_deformation(&phi).unwrap();
        let h = phi.mesh_size();
        let mut worst: f64 = 0.0;
        for j in 0..=10 {
            for i in 0..=10 {
                let x = [0.45 + 0.01 * i as f64, 0.45 + 0.01 * j as f64];
                let d = phi.eval(x).unwrap();
                let e = inv.eval(x).unwrap();
                worst = worst.max((e[0] - x[0] + (d[0] - x[0])).abs()).max((e[1] - x[1] + (d[1] - x[1])).abs());
            }
        }
        assert!(worst < 2.0 * h * h, "level {level}: {worst:e}");
    }
}

#[test]
fn pure_transport_has_no_modulation() {
    let p = EnergyParams::default();
    let u0 = gaussian_blob(6, [0.5, 0.5], 0.12, 0.6, 0.1);
    let phi = smooth_bump_deformation(5, 0.015, [1.0, 0.5]);
    let u1 = compose(&u0, &invert_deformation(&phi).unwrap());
    let mut cfg = ShootingConfig::new(5);
    cfg.smoothing = false;
    let reg = register(&u0, &u1, &p, &cfg.registration).unwrap();
    let out = exp2(&u0, &u1, &reg.phi, &p, &cfg).unwrap();
    let transported = compose(&u1, &invert_deformation(&out.phi).unwrap());
    let err = l2_diff(&out.image, &transported);
    assert!(err < 1e-2, "{err:e}");
}

#[test]
fn exp2_recovers_a_three_image_geodesic() {
    let p = EnergyParams::default();
    let a = gaussian_blob(6, [0.46, 0.5], 0.1, 0.6, 0.1);
    let b = gaussian_blob(6, [0.54, 0.5], 0.11, 0.7, 0.1);
    let geo = interpolate(&a, &b, &p, &InterpolationConfig::new(2, 5)).unwrap();
    let mut cfg = ShootingConfig::new(5);
    cfg.smoothing = false;
    let out = exp2(&geo.images[0], &geo.images[1], &geo.deformations[0], &p, &cfg).unwrap();
    let err = l2_diff(&out.image, &geo.images[2]);
    let dphi = out.phi.max_control_diff(&geo.deformations[1]);
    assert!(err < 1e-2, "image error {err:e}");
    assert!(dphi < 1e-3, "deformation error {dphi:e}");
}

#[test]
fn identical_images_stay_put() {
    let p = EnergyParams::default();
    let u = random_smooth_image(5, 2);
    let res = exp_k(&u, &u, 4, &p, &ShootingConfig::new(4)).unwrap();
    assert_eq!(res.images.len(), 5);
    for img in &res.images {
        assert!(img.max_abs_diff(&u) < 1e-10);
    }
    for phi in &res.deformations {
        assert!(phi.max_displacement() < 1e-10);
    }
}

#[test]
fn constants_give_an_arithmetic_progression() {
    let p = EnergyParams::default();
    let res = exp_k(&Image::constant(5, 0.2), &Image::constant(5, 0.3), 4, &p, &ShootingConfig::new(4)).unwrap();
    for (k, img) in res.images.iter().enumerate() {
        let want = 0.2 + 0.1 * k as f64;
        assert!(img.values().iter().all(|v| (v - want).abs() < 1e-10), "image {k}");
    }
    for m in &res.modulations {
        assert!(m.values().iter().all(|v| (v - 0.1).abs() < 1e-10));
    }
}
