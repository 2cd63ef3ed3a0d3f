use crate::error::{Error, Result};

/// Determinants below this magnitude are treated as singular.
pub const SINGULAR_THRESHOLD: f64 = 1e-12;

/// Dense 2x2 matrix, `m[row][col]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Mat2 {
    pub m: [[f64; 2]; 2],
}

impl Mat2 {
    #[inline]
    pub const fn new(m: [[f64; 2]; 2]) -> Self {
        Mat2 { m }
    }

    #[inline]
    pub const fn identity() -> Self {
        Mat2 { m: [[1.0, 0.0], [0.0, 1.0]] }
    }

    #[inline]
    pub const fn zero() -> Self {
        Mat2 { m: [[0.0; 2]; 2] }
    }

    #[inline]
    pub fn det(&self) -> f64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    #[inline]
    pub fn transpose(&self) -> Mat2 {
        Mat2::new([[self.m[0][0], self.m[1][0]], [self.m[0][1], self.m[1][1]]])
    }

    /// Cofactor matrix, `cof A = det(A) A^{-T}`.
    #[inline]
    pub fn cof(&self) -> Mat2 {
        Mat2::new([[self.m[1][1], -self.m[1][0]], [-self.m[0][1], self.m[0][0]]])
    }

    pub fn inv(&self) -> Result<Mat2> {
        let det = self.det();
        if det.abs() <= SINGULAR_THRESHOLD {
            return Err(Error::Singular(det));
        }
        let r = 1.0 / det;
        Ok(Mat2::new([
            [self.m[1][1] * r, -self.m[0][1] * r],
            [-self.m[1][0] * r, self.m[0][0] * r],
        ]))
    }

    #[inline]
    pub fn mul(&self, o: &Mat2) -> Mat2 {
        let mut r = [[0.0; 2]; 2];
        for (i, row) in r.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.m[i][0] * o.m[0][j] + self.m[i][1] * o.m[1][j];
            }
        }
        Mat2::new(r)
    }

    #[inline]
    pub fn mul_vec(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.m[0][0] * v[0] + self.m[0][1] * v[1],
            self.m[1][0] * v[0] + self.m[1][1] * v[1],
        ]
    }

    #[inline]
    pub fn add(&self, o: &Mat2) -> Mat2 {
        Mat2::new([
            [self.m[0][0] + o.m[0][0], self.m[0][1] + o.m[0][1]],
            [self.m[1][0] + o.m[1][0], self.m[1][1] + o.m[1][1]],
        ])
    }

    #[inline]
    pub fn sub(&self, o: &Mat2) -> Mat2 {
        self.add(&o.scale(-1.0))
    }

    #[inline]
    pub fn scale(&self, s: f64) -> Mat2 {
        Mat2::new([[s * self.m[0][0], s * self.m[0][1]], [s * self.m[1][0], s * self.m[1][1]]])
    }

    /// Frobenius product `A : B`.
    #[inline]
    pub fn ddot(&self, o: &Mat2) -> f64 {
        self.m[0][0] * o.m[0][0]
            + self.m[0][1] * o.m[0][1]
            + self.m[1][0] * o.m[1][0]
            + self.m[1][1] * o.m[1][1]
    }

    pub fn max_abs(&self) -> f64 {
        self.m.iter().flatten().fold(0.0, |a, v| a.max(v.abs()))
    }
}

pub fn det2(m: &Mat2) -> f64 {
    m.det()
}

pub fn inv2(m: &Mat2) -> Result<Mat2> {
    m.inv()
}

pub fn cof2(m: &Mat2) -> Mat2 {
    m.cof()
}
