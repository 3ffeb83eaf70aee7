//! Square band matrices with an LU factorization (partial pivoting).

use crate::error::{Error, Result};

/// `n × n` matrix storing only the diagonals `-kl..=ku`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    // row-major: row i holds columns i-kl ..= i+ku at offsets 0..=kl+ku
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self {
            n,
            kl,
            ku,
            data: vec![0.0; n * (kl + ku + 1)],
        }
    }

    /// Copies the band of a dense row-major matrix and returns it together
    /// with the largest magnitude that was dropped outside the band.
    pub fn from_dense(dense: &[Vec<f64>], kl: usize, ku: usize) -> (Self, f64) {
        let n = dense.len();
        let mut m = Self::zeros(n, kl, ku);
        let mut dropped = 0.0_f64;
        for (i, row) in dense.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if m.in_band(i, j) {
                    m.set(i, j, v);
                } else {
                    dropped = dropped.max(v.abs());
                }
            }
        }
        (m, dropped)
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn lower_bandwidth(&self) -> usize {
        self.kl
    }

    pub fn upper_bandwidth(&self) -> usize {
        self.ku
    }

    #[inline]
    pub fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && j + self.kl >= i && j <= i + self.ku
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.data[i * (self.kl + self.ku + 1) + j + self.kl - i]
        } else {
            0.0
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band");
        let w = self.kl + self.ku + 1;
        self.data[i * w + j + self.kl - i] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |a, &v| a.max(v.abs()))
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    /// `self + c · other`, widening the band as needed.
    pub fn add_scaled(&self, c: f64, other: &BandedMatrix) -> BandedMatrix {
        assert_eq!(self.n, other.n);
        let mut out = Self::zeros(self.n, self.kl.max(other.kl), self.ku.max(other.ku));
        for i in 0..self.n {
            let lo = i.saturating_sub(out.kl);
            let hi = (i + out.ku).min(self.n - 1);
            for j in lo..=hi {
                out.set(i, j, self.get(i, j) + c * other.get(i, j));
            }
        }
        out
    }

    #[inline]
    fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let w = self.kl + self.ku + 1;
        let lo = i.saturating_sub(self.kl);
        let hi = (i + self.ku).min(self.n - 1);
        let row = &self.data[i * w + lo + self.kl - i..i * w + hi + self.kl - i + 1];
        row.iter().zip(&x[lo..=hi]).map(|(a, b)| a * b).sum()
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            *yi = self.row_dot(i, x);
        }
    }

    /// `y += c · A x`.
    pub fn matvec_add(&self, c: f64, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            *yi += c * self.row_dot(i, x);
        }
    }

    /// Quadratic form `xᵀ A x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        (0..self.n).map(|i| x[i] * self.row_dot(i, x)).sum()
    }

    /// Cholesky test for symmetric positive definiteness.
    pub fn is_positive_definite(&self) -> bool {
        let a = self.to_dense();
        let n = self.n;
        let mut l = vec![vec![0.0; n]; n];
        for j in 0..n {
            let mut d = a[j][j];
            for k in 0..j {
                d -= l[j][k] * l[j][k];
            }
            if !(d > 0.0) {
                return false;
            }
            l[j][j] = d.sqrt();
            for i in j + 1..n {
                let mut s = a[i][j];
                for k in 0..j {
                    s -= l[i][k] * l[j][k];
                }
                l[i][j] = s / l[j][j];
            }
        }
        true
    }

    pub fn factorize(&self) -> Result<BandedLu> {
        BandedLu::new(self)
    }
}

/// LU factors of a band matrix. Row interchanges widen the upper band to
/// `kl + ku`; multipliers are kept in place of the eliminated entries.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    // upper bandwidth of U
    ku: usize,
    // row-major, row i holds columns i-kl ..= i+ku
    data: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    fn new(a: &BandedMatrix) -> Result<Self> {
        let n = a.n;
        let kl = a.kl;
        let ku = a.kl + a.ku;
        let w = kl + ku + 1;
        let mut data = vec![0.0; n * w];
        let idx = |i: usize, j: usize| i * w + j + kl - i;
        for i in 0..n {
            let lo = i.saturating_sub(a.kl);
            let hi = (i + a.ku).min(n.saturating_sub(1));
            for j in lo..=hi {
                data[idx(i, j)] = a.get(i, j);
            }
        }
        let scale = a.max_abs().max(f64::MIN_POSITIVE);
        let mut pivots = vec![0; n];
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = data[idx(k, k)].abs();
            for i in k + 1..=last {
                let v = data[idx(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= 1e-14 * scale {
                return Err(Error::Singular(format!(
                    "zero pivot in column {k} of a {n}x{n} band matrix"
                )));
            }
            pivots[k] = p;
            let jmax = (k + ku).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    data.swap(idx(k, j), idx(p, j));
                }
            }
            let piv = data[idx(k, k)];
            for i in k + 1..=last {
                let f = data[idx(i, k)] / piv;
                data[idx(i, k)] = f;
                if f != 0.0 {
                    for j in k + 1..=jmax {
                        data[idx(i, j)] -= f * data[idx(k, j)];
                    }
                }
            }
        }
        Ok(Self {
            n,
            kl,
            ku,
            data,
            pivots,
        })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// Overwrites `b` with the solution of `A x = b`.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        let w = self.kl + self.ku + 1;
        let idx = |i: usize, j: usize| i * w + j + self.kl - i;
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                for i in k + 1..=(k + self.kl).min(n - 1) {
                    b[i] -= self.data[idx(i, k)] * bk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut acc = b[k];
            for j in k + 1..=(k + self.ku).min(n - 1) {
                acc -= self.data[idx(k, j)] * b[j];
            }
            b[k] = acc / self.data[idx(k, k)];
        }
    }
}
