//! Small dense 3×3 tensor algebra and the symmetric tensors exchanged between
//! the solver and the closure models.

use crate::error::{invalid, Error, Result};
use serde::{Deserialize, Serialize};

pub type Mat3 = [[f64; 3]; 3];

pub const IDENTITY: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

pub fn zeros() -> Mat3 {
    [[0.0; 3]; 3]
}

pub fn diag(d: [f64; 3]) -> Mat3 {
    [[d[0], 0.0, 0.0], [0.0, d[1], 0.0], [0.0, 0.0, d[2]]]
}

pub fn trace(a: &Mat3) -> f64 {
    a[0][0] + a[1][1] + a[2][2]
}

pub fn transpose(a: &Mat3) -> Mat3 {
    let mut t = zeros();
    for i in 0..3 {
        for j in 0..3 {
            t[i][j] = a[j][i];
        }
    }
    t
}

pub fn matmul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut c = zeros();
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

pub fn add_scaled(a: &Mat3, c: f64, b: &Mat3) -> Mat3 {
    let mut r = *a;
    for i in 0..3 {
        for j in 0..3 {
            r[i][j] += c * b[i][j];
        }
    }
    r
}

pub fn scale(c: f64, a: &Mat3) -> Mat3 {
    add_scaled(&zeros(), c, a)
}

/// `(A + Aᵀ)/2`.
pub fn symmetrize(a: &Mat3) -> Mat3 {
    let mut s = zeros();
    for i in 0..3 {
        for j in 0..3 {
            s[i][j] = 0.5 * (a[i][j] + a[j][i]);
        }
    }
    s
}

/// Largest absolute entry.
pub fn max_abs(a: &Mat3) -> f64 {
    a.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn asymmetry(a: &Mat3) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..3 {
        for j in 0..i {
            m = m.max((a[i][j] - a[j][i]).abs());
        }
    }
    m
}

/// Eigen-decomposition of a symmetric matrix: eigenvalues in descending
/// order, eigenvectors as the columns of `vectors`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetricEigen {
    pub values: [f64; 3],
    pub vectors: Mat3,
}

impl SymmetricEigen {
    /// `V diag(d) Vᵀ`.
    pub fn reconstruct(&self, d: [f64; 3]) -> Mat3 {
        let v = &self.vectors;
        let mut r = zeros();
        for i in 0..3 {
            for j in 0..3 {
                r[i][j] = (0..3).map(|k| v[i][k] * d[k] * v[j][k]).sum();
            }
        }
        r
    }
}

/// Cyclic Jacobi rotations to machine precision.
pub fn symmetric_eigen(a: &Mat3) -> Result<SymmetricEigen> {
    if a.iter().flatten().any(|v| !v.is_finite()) {
        return Err(invalid("eigendecomposition of a non-finite matrix"));
    }
    let mut m = symmetrize(a);
    let mut v = IDENTITY;
    let scale = max_abs(&m).max(f64::MIN_POSITIVE);
    for _sweep in 0..50 {
        let off = m[0][1].abs() + m[0][2].abs() + m[1][2].abs();
        if off <= 1e-17 * scale {
            let mut idx = [0usize, 1, 2];
            idx.sort_by(|&x, &y| m[y][y].total_cmp(&m[x][x]));
            let values = [m[idx[0]][idx[0]], m[idx[1]][idx[1]], m[idx[2]][idx[2]]];
            let mut vectors = zeros();
            for (col, &k) in idx.iter().enumerate() {
                for row in 0..3 {
                    vectors[row][col] = v[row][k];
                }
            }
            return Ok(SymmetricEigen { values, vectors });
        }
        for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
            if m[p][q] == 0.0 {
                continue;
            }
            let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            for k in 0..3 {
                let (mkp, mkq) = (m[k][p], m[k][q]);
                m[k][p] = c * mkp - s * mkq;
                m[k][q] = s * mkp + c * mkq;
            }
            for k in 0..3 {
                let (mpk, mqk) = (m[p][k], m[q][k]);
                m[p][k] = c * mpk - s * mqk;
                m[q][k] = s * mpk + c * mqk;
            }
            for row in v.iter_mut() {
                let (vp, vq) = (row[p], row[q]);
                row[p] = c * vp - s * vq;
                row[q] = s * vp + c * vq;
            }
        }
    }
    Err(Error::NoConvergence {
        iterations: 50,
        residual: m[0][1].abs() + m[0][2].abs() + m[1][2].abs(),
    })
}

/// Second moment `C = ⟨qq⟩` of a unit-mass distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConformationTensor {
    pub entries: Mat3,
}

impl ConformationTensor {
    pub fn new(entries: Mat3) -> Self {
        Self { entries }
    }

    pub fn trace(&self) -> f64 {
        trace(&self.entries)
    }

    pub fn eigen(&self) -> Result<SymmetricEigen> {
        symmetric_eigen(&self.entries)
    }

    pub fn is_positive_definite(&self) -> bool {
        self.eigen().map(|e| e.values[2] > 0.0).unwrap_or(false)
    }

    /// Symmetric, positive definite and with trace below one.
    pub fn is_admissible(&self) -> bool {
        asymmetry(&self.entries) <= 1e-12 * max_abs(&self.entries).max(1.0)
            && self.is_positive_definite()
            && self.trace() < 1.0
    }
}

/// Symmetric polymer stress with the first normal-stress difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StressTensor {
    pub entries: Mat3,
}

impl StressTensor {
    pub fn new(entries: Mat3) -> Self {
        Self { entries }
    }

    pub fn shear(&self) -> f64 {
        self.entries[0][1]
    }

    /// `τ₁₁ − τ₂₂`.
    pub fn n1(&self) -> f64 {
        self.entries[0][0] - self.entries[1][1]
    }
}

/// Lagrange multipliers of the quasi-equilibrium density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiplierTensor {
    pub entries: Mat3,
}
