//! Approximate inversion of spline deformations.
//!
//! The spline mesh vertices are pushed forward by `Φ`; every deformed cell is
//! treated as a bilinear quadrilateral. Each interior knot is located in one of
//! these quadrilaterals, the bilinear map is inverted there, and the resulting
//! displacements at the knots are interpolated back into the spline space.

use crate::error::{Error, Result};
use crate::grid::{Deformation, Point};

/// Tolerance on the local coordinates when testing whether a point lies in a
/// deformed cell; shared edges are accepted from both sides.
const INSIDE_TOL: f64 = 1e-10;

fn bilinear(q: &[Point; 4], s: f64, t: f64) -> Point {
    let w = [(1.0 - s) * (1.0 - t), s * (1.0 - t), (1.0 - s) * t, s * t];
    [
        w[0] * q[0][0] + w[1] * q[1][0] + w[2] * q[2][0] + w[3] * q[3][0],
        w[0] * q[0][1] + w[1] * q[1][1] + w[2] * q[2][1] + w[3] * q[3][1],
    ]
}

/// Local coordinates `(s, t)` with `bilinear(q, s, t) = p`, if they lie in the
/// unit square. Corners are ordered (0,0), (1,0), (0,1), (1,1).
fn invert_bilinear(q: &[Point; 4], p: Point) -> Option<(f64, f64)> {
    let (mut s, mut t) = (0.5, 0.5);
    for _ in 0..30 {
        let f = bilinear(q, s, t);
        let r = [f[0] - p[0], f[1] - p[1]];
        let ds = [
            (1.0 - t) * (q[1][0] - q[0][0]) + t * (q[3][0] - q[2][0]),
            (1.0 - t) * (q[1][1] - q[0][1]) + t * (q[3][1] - q[2][1]),
        ];
        let dt = [
            (1.0 - s) * (q[2][0] - q[0][0]) + s * (q[3][0] - q[1][0]),
            (1.0 - s) * (q[2][1] - q[0][1]) + s * (q[3][1] - q[1][1]),
        ];
        let det = ds[0] * dt[1] - dt[0] * ds[1];
        if det.abs() < 1e-300 {
            return None;
        }
        let step_s = (r[0] * dt[1] - dt[0] * r[1]) / det;
        let step_t = (ds[0] * r[1] - r[0] * ds[1]) / det;
        s -= step_s;
        t -= step_t;
        if step_s.abs().max(step_t.abs()) < 1e-15 {
            break;
        }
    }
    let inside = |v: f64| (-INSIDE_TOL..=1.0 + INSIDE_TOL).contains(&v);
    if inside(s) && inside(t) {
        Some((s.clamp(0.0, 1.0), t.clamp(0.0, 1.0)))
    } else {
        None
    }
}

/// Spline approximation of `Φ⁻¹`; the boundary stays pinned to the identity.
pub fn invert_deformation(phi: &Deformation) -> Result<Deformation> {
    let n = phi.cells();
    let h = phi.mesh_size();
    let side = n + 1;
    let verts: Vec<Point> = (0..side * side)
        .map(|k| phi.value_unchecked([(k % side) as f64 * h, (k / side) as f64 * h]))
        .collect();

    // Bin deformed cells by their bounding boxes on the undeformed mesh.
    let mut bins: Vec<Vec<u32>> = vec![Vec::new(); n * n];
    let bin_of = |v: f64| ((v * n as f64).floor() as isize).clamp(0, n as isize - 1) as usize;
    let quad = |ci: usize, cj: usize| -> [Point; 4] {
        let k = cj * side + ci;
        [verts[k], verts[k + 1], verts[k + side], verts[k + side + 1]]
    };
    for cj in 0..n {
        for ci in 0..n {
            let q = quad(ci, cj);
            let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
            for v in &q {
                for c in 0..2 {
                    lo[c] = lo[c].min(v[c]);
                    hi[c] = hi[c].max(v[c]);
                }
            }
            for by in bin_of(lo[1] - INSIDE_TOL)..=bin_of(hi[1] + INSIDE_TOL) {
                for bx in bin_of(lo[0] - INSIDE_TOL)..=bin_of(hi[0] + INSIDE_TOL) {
                    bins[by * n + bx].push((cj * n + ci) as u32);
                }
            }
        }
    }

    let mut nodal = vec![[0.0; 2]; side * side];
    for j in 1..n {
        for i in 1..n {
            let p = [i as f64 * h, j as f64 * h];
            let mut found = None;
            // A knot sits on a bin corner; the four bins around it cover all
            // cells that can contain it.
            'search: for by in [j - 1, j.min(n - 1)] {
                for bx in [i - 1, i.min(n - 1)] {
                    for &c in &bins[by * n + bx] {
                        let (ci, cj) = (c as usize % n, c as usize / n);
                        if let Some((s, t)) = invert_bilinear(&quad(ci, cj), p) {
                            found = Some([(ci as f64 + s) * h, (cj as f64 + t) * h]);
                            break 'search;
                        }
                    }
                }
            }
            let x = found.ok_or(Error::Inversion(p[0], p[1]))?;
            nodal[j * side + i] = [x[0] - p[0], x[1] - p[1]];
        }
    }
    Deformation::interpolate_nodal_displacements(phi.level(), &nodal)
}
