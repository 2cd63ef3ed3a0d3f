use std::sync::OnceLock;

use metamorph::energy::{matching_energy, path_energy, EnergyParams};
use metamorph::grid::Image;
use metamorph::interpolation::{interpolate, optimal_images, InterpolationConfig, InterpolationResult};
use metamorph::synthetic::{gaussian_blob, random_deformation, random_smooth_image};

fn blobs() -> (Image, Image) {
    (gaussian_blob(5, [0.44, 0.48], 0.09, 0.6, 0.1), gaussian_blob(5, [0.56, 0.52], 0.11, 0.7, 0.1))
}

fn blob_path() -> &'static InterpolationResult {
    static PATH: OnceLock<InterpolationResult> = OnceLock::new();
    PATH.get_or_init(|| {
        let (a, b) = blobs();
        interpolate(&a, &b, &EnergyParams::default(), &InterpolationConfig::new(4, 4)).unwrap()
    })
}

#[test]
fn endpoints_are_bit_identical() {
    let (a, b) = blobs();
    let res = blob_path();
    assert_eq!(res.images[0], a);
    assert_eq!(res.images[4], b);
    assert_eq!(res.deformations.len(), 4);
}

#[test]
fn energy_descends_and_equidistributes() {
    let p = EnergyParams::default();
    let res = blob_path();
    assert!(res.energies.windows(2).all(|w| w[1] <= w[0]));
    let e = path_energy(&res.images, &res.deformations, &p).unwrap();
    assert!((e - res.energies.last().unwrap()).abs() < 1e-9 * e);
    let seg: Vec<f64> = (0..4)
        .map(|k| 4.0 * matching_energy(&res.images[k], &res.images[k + 1], &res.deformations[k], &p).unwrap().total)
        .collect();
    let (lo, hi) = seg.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
    assert!(hi <= 1.2 * lo, "segment energies {seg:?}");
}

#[test]
fn equal_end_points() {
    let u = random_smooth_image(5, 6);
    let res = interpolate(&u, &u, &EnergyParams::default(), &InterpolationConfig::new(3, 4)).unwrap();
    for img in &res.images {
        assert!(img.max_abs_diff(&u) < 1e-12);
    }
    assert!(res.deformations.iter().all(|d| d.max_displacement() == 0.0));
}

#[test]
fn optimal_images_have_vanishing_nodal_derivative() {
    let p = EnergyParams::default();
    let a = random_smooth_image(4, 1);
    let b = random_smooth_image(4, 2);
    let phis: Vec<_> = (0..3).map(|s| random_deformation(3, 0.01, 40 + s)).collect();
    let imgs = optimal_images(&a, &b, &phis).unwrap();
    let total = |imgs: &[Image]| -> f64 {
        (0..3).map(|s| matching_energy(&imgs[s], &imgs[s + 1], &phis[s], &p).unwrap().matching).sum()
    };
    // The matching terms are quadratic in the nodal values, so central
    // differences are exact up to rounding.
    let eps = 1e-3;
    for k in 1..3 {
        for node in (0..imgs[k].values().len()).step_by(7) {
            let mut plus = imgs.clone();
            plus[k].values_mut()[node] += eps;
            let mut minus = imgs.clone();
            minus[k].values_mut()[node] -= eps;
            let d = (total(&plus) - total(&minus)) / (2.0 * eps);
            assert!(d.abs() < 1e-8, "image {k}, node {node}: {d:e}");
        }
    }
}
