use super::{dot, norm2, SparseSymmetricMatrix};
use crate::error::{Error, Result};

/// Relative residual `‖Ax − b‖₂ / ‖b‖₂` every solve must reach.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

/// Skyline storage budget (number of stored factor entries) above which
/// [`SpdSolver`] switches from Cholesky to conjugate gradients.
const MAX_PROFILE_ENTRIES: usize = 60_000_000;

/// Cholesky factor `A = L L^T` in row-oriented skyline (envelope) storage.
#[derive(Debug, Clone)]
pub struct SkylineCholesky {
    n: usize,
    first: Vec<usize>,
    start: Vec<usize>,
    data: Vec<f64>,
}

fn profile(a: &SparseSymmetricMatrix) -> (Vec<usize>, Vec<usize>) {
    let n = a.dim();
    let first: Vec<usize> = (0..n).map(|i| a.row(i).0.first().copied().unwrap_or(i).min(i)).collect();
    let mut start = Vec::with_capacity(n + 1);
    let mut acc = 0usize;
    for (i, &f) in first.iter().enumerate() {
        start.push(acc);
        acc += i - f + 1;
    }
    start.push(acc);
    (first, start)
}

impl SkylineCholesky {
    pub fn profile_size(a: &SparseSymmetricMatrix) -> usize {
        *profile(a).1.last().unwrap()
    }

    pub fn factor(a: &SparseSymmetricMatrix) -> Result<Self> {
        let n = a.dim();
        let (first, start) = profile(a);
        let mut data = vec![0.0; start[n]];
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j <= i {
                    data[start[i] + j - first[i]] = v;
                }
            }
        }
        for i in 0..n {
            let fi = first[i];
            for j in fi..=i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let (head, tail) = data.split_at_mut(start[i]);
                let row_i = &mut tail[..i - fi + 1];
                let s = if j < i {
                    let row_j = &head[start[j]..start[j] + j - fj + 1];
                    dot(&row_i[k0 - fi..j - fi], &row_j[k0 - fj..j - fj])
                } else {
                    dot(&row_i[k0 - fi..j - fi], &row_i[k0 - fi..j - fi])
                };
                let v = row_i[j - fi] - s;
                if j < i {
                    let ljj = head[start[j] + j - fj];
                    row_i[j - fi] = v / ljj;
                } else {
                    if v <= 0.0 || !v.is_finite() {
                        return Err(Error::NotSpd { index: i, pivot: v });
                    }
                    row_i[j - fi] = v.sqrt();
                }
            }
        }
        Ok(SkylineCholesky { n, first, start, data })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut y = b.to_vec();
        for i in 0..self.n {
            let fi = self.first[i];
            let row = &self.data[self.start[i]..self.start[i + 1]];
            let s = dot(&row[..i - fi], &y[fi..i]);
            y[i] = (y[i] - s) / row[i - fi];
        }
        for i in (0..self.n).rev() {
            let fi = self.first[i];
            let row = &self.data[self.start[i]..self.start[i + 1]];
            y[i] /= row[i - fi];
            let xi = y[i];
            for (yk, &l) in y[fi..i].iter_mut().zip(&row[..i - fi]) {
                *yk -= l * xi;
            }
        }
        y
    }
}

fn relative_residual(a: &SparseSymmetricMatrix, x: &[f64], b: &[f64]) -> (Vec<f64>, f64) {
    let ax = a.mul_vec(x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let nb = norm2(b);
    let rel = if nb == 0.0 { norm2(&r) } else { norm2(&r) / nb };
    (r, rel)
}

/// Jacobi-preconditioned conjugate gradients, capped at `10 n` iterations.
pub fn conjugate_gradient(
    a: &SparseSymmetricMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
) -> Result<Vec<f64>> {
    let inv_diag: Vec<f64> = a
        .diag()
        .iter()
        .enumerate()
        .map(|(i, &d)| if d > 0.0 { Ok(1.0 / d) } else { Err(Error::NotSpd { index: i, pivot: d }) })
        .collect::<Result<_>>()?;
    let jacobi = |r: &[f64]| r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    matrix_free_cg(|x| a.mul_vec(x), jacobi, b, x0, tol, 10 * a.dim().max(1))
}

/// Preconditioned conjugate gradients for an operator and a symmetric positive
/// definite preconditioner given as closures. Stops when `|b − A x| < tol |b|`.
pub fn matrix_free_cg<F, P>(
    mut apply: F,
    mut precondition: P,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iterations: usize,
) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Vec<f64>,
    P: FnMut(&[f64]) -> Vec<f64>,
{
    let n = b.len();
    let nb = norm2(b);
    if nb == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let mut x = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![0.0; n]);
    let residual = |apply: &mut F, x: &[f64]| -> (Vec<f64>, f64) {
        let r: Vec<f64> = b.iter().zip(apply(x)).map(|(bi, ai)| bi - ai).collect();
        let rel = norm2(&r) / nb;
        (r, rel)
    };
    let (mut r, mut rel) = residual(&mut apply, &x);
    let mut z = precondition(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 0..max_iterations {
        if rel < tol {
            return Ok(x);
        }
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            return Err(Error::NotSpd { index: it, pivot: pap });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rel = norm2(&r) / nb;
        z = precondition(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    // Recompute the true residual before giving up.
    let (_, true_rel) = residual(&mut apply, &x);
    if true_rel < tol {
        Ok(x)
    } else {
        Err(Error::SolverStalled { iterations: max_iterations, residual: true_rel })
    }
}

/// A reusable solver for one SPD matrix: skyline Cholesky when the profile fits
/// the storage budget, Jacobi-preconditioned CG otherwise.
#[derive(Debug, Clone)]
pub enum SpdSolver {
    Cholesky { matrix: SparseSymmetricMatrix, factor: SkylineCholesky },
    Cg { matrix: SparseSymmetricMatrix },
}

impl SpdSolver {
    pub fn new(matrix: SparseSymmetricMatrix) -> Result<Self> {
        if SkylineCholesky::profile_size(&matrix) <= MAX_PROFILE_ENTRIES {
            let factor = SkylineCholesky::factor(&matrix)?;
            Ok(SpdSolver::Cholesky { matrix, factor })
        } else {
            Ok(SpdSolver::Cg { matrix })
        }
    }

    /// Always uses conjugate gradients.
    pub fn iterative(matrix: SparseSymmetricMatrix) -> Self {
        SpdSolver::Cg { matrix }
    }

    pub fn matrix(&self) -> &SparseSymmetricMatrix {
        match self {
            SpdSolver::Cholesky { matrix, .. } | SpdSolver::Cg { matrix } => matrix,
        }
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        match self {
            SpdSolver::Cholesky { matrix, factor } => {
                let mut x = factor.solve(b);
                let (mut r, mut rel) = relative_residual(matrix, &x, b);
                let mut sweeps = 0;
                while rel >= RESIDUAL_TOLERANCE && sweeps < 3 {
                    let dx = factor.solve(&r);
                    x.iter_mut().zip(&dx).for_each(|(xi, di)| *xi += di);
                    (r, rel) = relative_residual(matrix, &x, b);
                    sweeps += 1;
                }
                if rel >= RESIDUAL_TOLERANCE {
                    return Err(Error::SolverStalled { iterations: sweeps, residual: rel });
                }
                Ok(x)
            }
            SpdSolver::Cg { matrix } => conjugate_gradient(matrix, b, None, RESIDUAL_TOLERANCE),
        }
    }
}

/// Solves `A x = b` for symmetric positive definite `A`.
pub fn solve_spd(a: &SparseSymmetricMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if a.dim() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "matrix of dimension {} and right-hand side of length {}",
            a.dim(),
            b.len()
        )));
    }
    SpdSolver::new(a.clone())?.solve(b)
}
