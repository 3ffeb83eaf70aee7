//! Radial Jacobi bases in the mapped coordinate `p = 2r² − 1` and the
//! Galerkin matrices they generate under the weight `(1−p)^s (1+p)^{1/2}`.
//!
//! A basis function is `c_n (1+p)^a J_n^{s−2, β}(p)` with `c_n` the inverse
//! weighted norm of `J_n`. The regular-at-the-pole family keeps `a = 1`,
//! `β = 3/2` for every `l > 0`; the smooth family uses `a = l/2`,
//! `β = l − 1/2`, so its members vanish like `r^l` at the origin.

use crate::banded::BandedMatrix;
use crate::error::{invalid, Error, Result};
use crate::special::{gauss_jacobi_rule, jacobi_all_with_derivative, jacobi_norm_sq, QuadratureRule};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BasisKind {
    /// `(1+p) J_n^{s−2,3/2}` for `l > 0`, `n = 0..=N`.
    #[serde(rename = "JG1")]
    Jg1,
    /// `(1+p)^{l/2} J_n^{s−2,l−1/2}` for `l > 0`, `n = 0..=N−l`.
    #[serde(rename = "JGinf")]
    JgInf,
}

impl fmt::Display for BasisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BasisKind::Jg1 => "JG1",
            BasisKind::JgInf => "JGinf",
        })
    }
}

impl FromStr for BasisKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jg1" => Ok(BasisKind::Jg1),
            "jginf" => Ok(BasisKind::JgInf),
            _ => Err(invalid(format!("unknown basis kind '{s}' (expected JG1 or JGinf)"))),
        }
    }
}

impl BasisKind {
    /// Number of radial functions paired with degree `l` at truncation `n_max`.
    pub fn radial_dim(self, l: usize, n_max: usize) -> usize {
        match self {
            BasisKind::Jg1 => n_max + 1,
            BasisKind::JgInf => (n_max + 1).saturating_sub(l),
        }
    }

    /// `(a, β)`: power of `(1+p)` and Jacobi β parameter for degree `l`.
    pub fn exponents(self, l: usize) -> (f64, f64) {
        if l == 0 {
            return (0.0, 0.5);
        }
        match self {
            BasisKind::Jg1 => (1.0, 1.5),
            BasisKind::JgInf => (0.5 * l as f64, l as f64 - 0.5),
        }
    }
}

/// The radial functions attached to one harmonic degree.
#[derive(Debug, Clone)]
pub struct RadialBasis {
    pub kind: BasisKind,
    pub s: f64,
    pub l: usize,
    pub dim: usize,
    pub alpha: f64,
    pub beta: f64,
    pub power: f64,
    scale: Vec<f64>,
}

impl RadialBasis {
    /// Normalized basis for even `l`.
    pub fn new(kind: BasisKind, s: f64, l: usize, n_max: usize) -> Result<Self> {
        if l % 2 == 1 {
            return Err(invalid(format!(
                "odd degree l = {l} is excluded by head-tail symmetry"
            )));
        }
        Self::with_any_degree(kind, s, l, n_max)
    }

    /// Same as [`RadialBasis::new`] but also accepts odd `l`.
    pub fn with_any_degree(kind: BasisKind, s: f64, l: usize, n_max: usize) -> Result<Self> {
        if !(s > 1.0) || !s.is_finite() {
            return Err(invalid(format!("weight index s must exceed 1, got {s}")));
        }
        let dim = kind.radial_dim(l, n_max);
        if dim == 0 {
            return Err(invalid(format!(
                "{kind} basis needs l <= N (l = {l}, N = {n_max})"
            )));
        }
        let (power, beta) = kind.exponents(l);
        let alpha = s - 2.0;
        let scale = (0..dim)
            .map(|n| 1.0 / jacobi_norm_sq(alpha, beta, n).sqrt())
            .collect();
        Ok(Self {
            kind,
            s,
            l,
            dim,
            alpha,
            beta,
            power,
            scale,
        })
    }

    /// Scaled Jacobi factors `c_n J_n(p)` and `c_n J_n'(p)`.
    fn jacobi_parts(&self, p: f64, vals: &mut [f64], ders: &mut [f64]) {
        jacobi_all_with_derivative(self.alpha, self.beta, p, vals, ders);
        for ((v, d), c) in vals.iter_mut().zip(ders.iter_mut()).zip(&self.scale) {
            *v *= c;
            *d *= c;
        }
    }

    /// `φ_n(p)` for `n = 0..dim`.
    pub fn eval_all(&self, p: f64, out: &mut [f64]) {
        let mut d = vec![0.0; self.dim];
        self.jacobi_parts(p, out, &mut d);
        let w = (1.0 + p).powf(self.power);
        out.iter_mut().for_each(|v| *v *= w);
    }

    /// `φ_n(p)` and `φ_n'(p)` for `n = 0..dim`.
    pub fn eval_all_with_derivative(&self, p: f64, vals: &mut [f64], ders: &mut [f64]) {
        self.jacobi_parts(p, vals, ders);
        let a = self.power;
        let w = (1.0 + p).powf(a);
        let wd = if a == 0.0 { 0.0 } else { a * (1.0 + p).powf(a - 1.0) };
        for (v, d) in vals.iter_mut().zip(ders.iter_mut()) {
            let (j, jd) = (*v, *d);
            *v = w * j;
            *d = wd * j + w * jd;
        }
    }

    /// Factored form of `φ_n` (`deriv = false`) or `φ_n'` (`deriv = true`):
    /// returns the `(1+p)` exponent and fills the remaining polynomial part.
    fn factored(&self, deriv: bool, p: f64, poly: &mut [f64], scratch: &mut [f64]) -> f64 {
        self.jacobi_parts(p, poly, scratch);
        if !deriv {
            return self.power;
        }
        let a = self.power;
        for (v, d) in poly.iter_mut().zip(scratch.iter()) {
            *v = a * *v + (1.0 + p) * d;
        }
        a - 1.0
    }
}

/// Unnormalized basis value: `(1+p)^a J_n^{s−2,β}(p)`.
pub fn radial_basis_eval(kind: BasisKind, s: f64, l: usize, n: usize, p: f64) -> Result<f64> {
    Ok(radial_basis_eval_with_derivative(kind, s, l, n, p)?.0)
}

/// Unnormalized basis value and `p`-derivative.
pub fn radial_basis_eval_with_derivative(
    kind: BasisKind,
    s: f64,
    l: usize,
    n: usize,
    p: f64,
) -> Result<(f64, f64)> {
    if l % 2 == 1 {
        return Err(invalid(format!(
            "odd degree l = {l} is excluded by head-tail symmetry"
        )));
    }
    if !(s > 1.0) {
        return Err(invalid(format!("weight index s must exceed 1, got {s}")));
    }
    if !(-1.0..=1.0).contains(&p) {
        return Err(invalid(format!("p = {p} outside [-1, 1]")));
    }
    let (a, beta) = kind.exponents(l);
    let (j, jd) = crate::special::jacobi_eval_with_derivative(s - 2.0, beta, n, p)?;
    let w = (1.0 + p).powf(a);
    let wd = if a == 0.0 { 0.0 } else { a * (1.0 + p).powf(a - 1.0) };
    Ok((w * j, wd * j + w * jd))
}

/// Extra factors multiplying a radial integrand besides the base weight
/// `(1−p)^s (1+p)^{1/2}`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RadialFactor {
    pub one_plus: i32,
    pub one_minus: i32,
}

/// Gauss–Jacobi rules keyed by `(α, β, npts)`.
#[derive(Debug, Default)]
pub(crate) struct RuleCache {
    rules: HashMap<(u64, u64, usize), QuadratureRule>,
}

impl RuleCache {
    pub fn get(&mut self, alpha: f64, beta: f64, npts: usize) -> Result<&QuadratureRule> {
        let key = (alpha.to_bits(), beta.to_bits(), npts);
        if !self.rules.contains_key(&key) {
            let rule = gauss_jacobi_rule(alpha, beta, npts)?;
            self.rules.insert(key, rule);
        }
        Ok(&self.rules[&key])
    }
}

/// Dense `[test][trial]` matrix of
/// `∫ F(trial_j) G(test_i) (1+p)^k₁ (1−p)^k₂ (1−p)^s (1+p)^{1/2} dp`
/// where `F`/`G` are basis values or derivatives as flagged.
#[allow(clippy::too_many_arguments)]
pub(crate) fn radial_inner(
    cache: &mut RuleCache,
    trial: &RadialBasis,
    trial_deriv: bool,
    test: &RadialBasis,
    test_deriv: bool,
    factor: RadialFactor,
    npts: usize,
) -> Result<Vec<Vec<f64>>> {
    let s = trial.s;
    let a_trial = if trial_deriv { trial.power - 1.0 } else { trial.power };
    let a_test = if test_deriv { test.power - 1.0 } else { test.power };
    let e_plus = 0.5 + factor.one_plus as f64 + a_trial + a_test;
    let e_minus = s + factor.one_minus as f64;
    let (beta_rule, int_plus) = if e_plus >= 0.0 {
        let k = e_plus.floor();
        (e_plus - k, k as i32)
    } else {
        (e_plus, 0)
    };
    if !(beta_rule > -1.0) || !(e_minus > -1.0) {
        return Err(Error::Quadrature(format!(
            "non-integrable radial integrand (exponents {e_minus}, {e_plus})"
        )));
    }
    let rule = cache.get(e_minus, beta_rule, npts)?;
    let (nt, ns) = (test.dim, trial.dim);
    let mut out = vec![vec![0.0; ns]; nt];
    let mut ft = vec![0.0; ns];
    let mut gt = vec![0.0; nt];
    let mut s1 = vec![0.0; ns];
    let mut s2 = vec![0.0; nt];
    for (&p, &w) in rule.nodes.iter().zip(&rule.weights) {
        trial.factored(trial_deriv, p, &mut ft, &mut s1);
        test.factored(test_deriv, p, &mut gt, &mut s2);
        let wk = w * (1.0 + p).powi(int_plus);
        for (row, &g) in out.iter_mut().zip(&gt) {
            let wg = wk * g;
            for (o, &f) in row.iter_mut().zip(&ft) {
                *o += wg * f;
            }
        }
    }
    Ok(out)
}

/// Quadrature size used for a radial block between degrees `l1` and `l2`.
pub(crate) fn radial_npts(l1: usize, l2: usize, n_max: usize) -> usize {
    n_max + l1.max(l2) + 6
}

/// Which of the four per-degree radial matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RadialMatrixKind {
    /// `(φ_j, φ_i)`
    Mass,
    /// `((1+p) φ_j', φ_i')`
    Stiffness,
    /// `(φ_j/(1+p), φ_i)`
    Angular,
    /// `((1+p)/(1−p) φ_j, φ_i')`
    Spring,
}

impl RadialMatrixKind {
    pub const ALL: [RadialMatrixKind; 4] = [
        RadialMatrixKind::Mass,
        RadialMatrixKind::Stiffness,
        RadialMatrixKind::Angular,
        RadialMatrixKind::Spring,
    ];

    /// Half-bandwidth of the matrix.
    pub fn half_bandwidth(self) -> usize {
        match self {
            RadialMatrixKind::Mass => 3,
            _ => 2,
        }
    }
}

/// Dense form of one per-degree radial matrix.
pub fn radial_matrix_dense(
    basis: &RadialBasis,
    which: RadialMatrixKind,
    n_max: usize,
) -> Result<Vec<Vec<f64>>> {
    let mut cache = RuleCache::default();
    radial_matrix_dense_cached(&mut cache, basis, which, n_max)
}

fn radial_matrix_dense_cached(
    cache: &mut RuleCache,
    basis: &RadialBasis,
    which: RadialMatrixKind,
    n_max: usize,
) -> Result<Vec<Vec<f64>>> {
    let npts = radial_npts(basis.l, basis.l, n_max);
    let f = |one_plus, one_minus| RadialFactor {
        one_plus,
        one_minus,
    };
    match which {
        RadialMatrixKind::Mass => radial_inner(cache, basis, false, basis, false, f(0, 0), npts),
        RadialMatrixKind::Stiffness => {
            radial_inner(cache, basis, true, basis, true, f(1, 0), npts)
        }
        RadialMatrixKind::Angular => {
            radial_inner(cache, basis, false, basis, false, f(-1, 0), npts)
        }
        RadialMatrixKind::Spring => radial_inner(cache, basis, false, basis, true, f(1, -1), npts),
    }
}

/// Dense `[test][trial]` block pair coupling trial degree `l` to test degree `l'`.
#[derive(Debug, Clone)]
pub struct CrossBlock {
    pub rows: usize,
    pub cols: usize,
    /// `2 ((1+p) φ_{l,j}, φ'_{l',i})`, row-major.
    pub stretch: Vec<f64>,
    /// `(φ_{l,j}, φ_{l',i})`, row-major.
    pub overlap: Vec<f64>,
}

impl CrossBlock {
    /// `y += c_s · stretch · x + c_o · overlap · x`.
    #[inline]
    pub fn apply_add(&self, cs: f64, co: f64, x: &[f64], y: &mut [f64]) {
        for i in 0..self.rows {
            let rs = &self.stretch[i * self.cols..(i + 1) * self.cols];
            let ro = &self.overlap[i * self.cols..(i + 1) * self.cols];
            let mut a = 0.0;
            let mut b = 0.0;
            for j in 0..self.cols {
                a += rs[j] * x[j];
                b += ro[j] * x[j];
            }
            y[i] += cs * a + co * b;
        }
    }
}

/// All radial matrices needed by the discrete system.
#[derive(Debug, Clone)]
pub struct RadialBlockSet {
    pub kind: BasisKind,
    pub s: f64,
    pub l_max: usize,
    pub n_max: usize,
    /// Degrees carried by the set, ascending.
    pub degrees: Vec<usize>,
    pub bases: Vec<RadialBasis>,
    pub mass: Vec<BandedMatrix>,
    pub stiffness: Vec<BandedMatrix>,
    pub angular: Vec<BandedMatrix>,
    pub spring: Vec<BandedMatrix>,
    /// Largest out-of-band magnitude relative to the max-norm, per degree,
    /// for mass, stiffness, angular and spring matrices. The angular matrix
    /// is not assembled for `l = 0`.
    pub band_residual: Vec<[f64; 4]>,
    cross: HashMap<(usize, usize), CrossBlock>,
}

impl RadialBlockSet {
    /// Index of degree `l` in `degrees`.
    pub fn position(&self, l: usize) -> Option<usize> {
        self.degrees.binary_search(&l).ok()
    }

    /// Block with test degree `l_test` and trial degree `l_trial`.
    pub fn cross(&self, l_test: usize, l_trial: usize) -> Option<&CrossBlock> {
        self.cross.get(&(l_test, l_trial))
    }
}

/// Builds radial blocks for even degrees `0, 2, …, l_max`.
pub fn build_radial_blocks(
    kind: BasisKind,
    s: f64,
    l_max: usize,
    n_max: usize,
) -> Result<RadialBlockSet> {
    let degrees: Vec<usize> = (0..=l_max).step_by(2).collect();
    build_radial_blocks_for(kind, s, &degrees, n_max, true)
}

/// Builds radial blocks for an explicit degree list (odd degrees allowed).
pub(crate) fn build_radial_blocks_for(
    kind: BasisKind,
    s: f64,
    degrees: &[usize],
    n_max: usize,
    even_only: bool,
) -> Result<RadialBlockSet> {
    if !(s > 1.0) {
        return Err(invalid(format!("weight index s must exceed 1, got {s}")));
    }
    let l_max = degrees.iter().copied().max().unwrap_or(0);
    if kind == BasisKind::JgInf && n_max < l_max {
        return Err(invalid(format!(
            "JGinf requires N >= L (N = {n_max}, L = {l_max})"
        )));
    }
    let mut cache = RuleCache::default();
    let bases = degrees
        .iter()
        .map(|&l| {
            if even_only {
                RadialBasis::new(kind, s, l, n_max)
            } else {
                RadialBasis::with_any_degree(kind, s, l, n_max)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut mats: [Vec<BandedMatrix>; 4] = Default::default();
    let mut band_residual = Vec::with_capacity(bases.len());
    for basis in &bases {
        let mut res = [0.0; 4];
        for (k, which) in RadialMatrixKind::ALL.iter().enumerate() {
            if *which == RadialMatrixKind::Angular && basis.l == 0 {
                // multiplied by l(l+1) = 0 in the operator
                mats[k].push(BandedMatrix::zeros(basis.dim, 2, 2));
                continue;
            }
            let dense = radial_matrix_dense_cached(&mut cache, basis, *which, n_max)?;
            let hb = which.half_bandwidth();
            let (band, dropped) = BandedMatrix::from_dense(&dense, hb, hb);
            let norm = dense
                .iter()
                .flatten()
                .fold(0.0_f64, |a, &v| a.max(v.abs()))
                .max(f64::MIN_POSITIVE);
            res[k] = dropped / norm;
            mats[k].push(band);
        }
        band_residual.push(res);
    }
    let mut cross = HashMap::new();
    let one = RadialFactor {
        one_plus: 1,
        one_minus: 0,
    };
    let none = RadialFactor {
        one_plus: 0,
        one_minus: 0,
    };
    for trial in &bases {
        for test in &bases {
            if trial.l.abs_diff(test.l) > 2 {
                continue;
            }
            let npts = radial_npts(trial.l, test.l, n_max);
            let st = radial_inner(&mut cache, trial, false, test, true, one, npts)?;
            let ov = radial_inner(&mut cache, trial, false, test, false, none, npts)?;
            let block = CrossBlock {
                rows: test.dim,
                cols: trial.dim,
                stretch: st.iter().flatten().map(|v| 2.0 * v).collect(),
                overlap: ov.into_iter().flatten().collect(),
            };
            cross.insert((test.l, trial.l), block);
        }
    }
    let [mass, stiffness, angular, spring] = mats;
    Ok(RadialBlockSet {
        kind,
        s,
        l_max,
        n_max,
        degrees: degrees.to_vec(),
        bases,
        mass,
        stiffness,
        angular,
        spring,
        band_residual,
        cross,
    })
}
