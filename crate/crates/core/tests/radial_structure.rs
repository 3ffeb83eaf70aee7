//! Radial basis and per-degree matrices against an independent construction:
//! explicit-sum Jacobi polynomials and composite Gauss–Legendre quadrature
//! after the substitution `p = −1 + 2u²`, which removes the `(1+p)^{1/2}`
//! endpoint singularity.

mod common;

use common::{radial_out_of_band, GL5};
use fene_core::layout::degrees_of_freedom;
use fene_core::radial::{radial_basis_eval_with_derivative, radial_matrix_dense, BasisKind, RadialBasis, RadialMatrixKind};


fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Generalized binomial `C(a, k)` for real `a > k − 1`.
fn binom(a: f64, k: usize) -> f64 {
    (ln_gamma(a + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma(a - k as f64 + 1.0)).exp()
}

/// `P_n^{(α,β)}(x) = Σ_k C(n+α, n−k) C(n+β, k) ((x−1)/2)^k ((x+1)/2)^{n−k}`.
fn jacobi_sum(alpha: f64, beta: f64, n: usize, x: f64) -> f64 {
    let nf = n as f64;
    (0..=n)
        .map(|k| {
            binom(nf + alpha, n - k) * binom(nf + beta, k) * ((x - 1.0) / 2.0).powi(k as i32) * ((x + 1.0) / 2.0).powi((n - k) as i32)
        })
        .sum()
}

fn jacobi_sum_derivative(alpha: f64, beta: f64, n: usize, x: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    0.5 * (n as f64 + alpha + beta + 1.0) * jacobi_sum(alpha + 1.0, beta + 1.0, n - 1, x)
}

fn jacobi_norm_sq(alpha: f64, beta: f64, n: usize) -> f64 {
    let nf = n as f64;
    let ab = alpha + beta;
    let ln = (ab + 1.0) * std::f64::consts::LN_2 - (2.0 * nf + ab + 1.0).ln() + ln_gamma(nf + alpha + 1.0)
        + ln_gamma(nf + beta + 1.0)
        - ln_gamma(nf + ab + 1.0)
        - ln_gamma(nf + 1.0);
    ln.exp()
}

/// Normalized basis value and derivative built from the explicit sums.
fn oracle_basis(kind: BasisKind, s: f64, l: usize, n: usize, p: f64) -> (f64, f64) {
    let (a, beta) = kind.exponents(l);
    let c = 1.0 / jacobi_norm_sq(s - 2.0, beta, n).sqrt();
    let j = jacobi_sum(s - 2.0, beta, n, p);
    let jd = jacobi_sum_derivative(s - 2.0, beta, n, p);
    let w = (1.0 + p).powf(a);
    let wd = if a == 0.0 { 0.0 } else { a * (1.0 + p).powf(a - 1.0) };
    (c * w * j, c * (wd * j + w * jd))
}

/// `∫ g(p) (1−p)^s (1+p)^{1/2} dp` with `p = −1 + 2u²`.
fn weighted_integral(s: f64, g: impl Fn(f64) -> f64) -> f64 {
    let panels = 400;
    let h = 1.0 / panels as f64;
    let mut sum = 0.0;
    for k in 0..panels {
        let mid = (k as f64 + 0.5) * h;
        for (x, w) in GL5 {
            let u = mid + 0.5 * h * x;
            let p = -1.0 + 2.0 * u * u;
            // (1+p)^{1/2} dp = √2 u · 4u du
            let jac = std::f64::consts::SQRT_2 * 4.0 * u * u;
            sum += 0.5 * h * w * g(p) * (1.0 - p).powf(s) * jac;
        }
    }
    sum
}

fn oracle_matrix(kind: BasisKind, s: f64, l: usize, n_max: usize, which: RadialMatrixKind) -> Vec<Vec<f64>> {
    let dim = kind.radial_dim(l, n_max);
    let mut out = vec![vec![0.0; dim]; dim];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = weighted_integral(s, |p| {
                let (ti, di) = oracle_basis(kind, s, l, i, p);
                let (tj, dj) = oracle_basis(kind, s, l, j, p);
                match which {
                    RadialMatrixKind::Mass => tj * ti,
                    RadialMatrixKind::Stiffness => (1.0 + p) * dj * di,
                    RadialMatrixKind::Angular => tj * ti / (1.0 + p),
                    RadialMatrixKind::Spring => (1.0 + p) / (1.0 - p) * tj * di,
                }
            });
        }
    }
    out
}

fn max_abs(m: &[Vec<f64>]) -> f64 {
    m.iter().flatten().fold(0.0, |a, v| a.max(v.abs()))
}

#[test]
fn unnormalized_basis_matches_explicit_sum() {
    for kind in [BasisKind::Jg1, BasisKind::JgInf] {
        for l in [0, 2, 6, 10] {
            for n in 0..=8 {
                for p in [-0.97_f64, -0.5, 0.0, 0.3, 0.9] {
                    let (a, beta) = kind.exponents(l);
                    let expect = (1.0 + p).powf(a) * jacobi_sum(4.0, beta, n, p);
                    let (got, _) = radial_basis_eval_with_derivative(kind, 6.0, l, n, p).unwrap();
                    assert!(
                        (got - expect).abs() <= 1e-9 * expect.abs().max(1.0),
                        "{kind} l={l} n={n} p={p}: {got} vs {expect}"
                    );
                }
            }
        }
    }
}

#[test]
fn radial_matrices_match_independent_quadrature() {
    let n_max = 10;
    for kind in [BasisKind::Jg1, BasisKind::JgInf] {
        for s in [5.0, 6.0] {
            for l in [0, 2, 4, 8] {
                let basis = RadialBasis::new(kind, s, l, n_max).unwrap();
                for which in RadialMatrixKind::ALL {
                    let got = radial_matrix_dense(&basis, which, n_max).unwrap();
                    let want = oracle_matrix(kind, s, l, n_max, which);
                    let scale = max_abs(&want);
                    for (i, (gr, wr)) in got.iter().zip(&want).enumerate() {
                        for (j, (g, w)) in gr.iter().zip(wr).enumerate() {
                            assert!(
                                (g - w).abs() <= 1e-10 * scale,
                                "{kind} s={s} l={l} {which:?} ({i},{j}): {g} vs {w}"
                            );
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn bandwidths_hold_for_every_even_degree() {
    for kind in [BasisKind::Jg1, BasisKind::JgInf] {
        let worst = radial_out_of_band(kind, 6.0, (0..=40).step_by(2), 40);
        assert!(worst <= 1e-13, "{kind}: out-of-band entry {worst:e}");
    }
}

#[test]
fn mass_matrices_are_symmetric_positive_definite() {
    for kind in [BasisKind::Jg1, BasisKind::JgInf] {
        for l in [0, 2, 20, 40] {
            let basis = RadialBasis::new(kind, 6.0, l, 40).unwrap();
            let m = radial_matrix_dense(&basis, RadialMatrixKind::Mass, 40).unwrap();
            let n = m.len();
            let dm = nalgebra::DMatrix::from_fn(n, n, |i, j| m[i][j]);
            assert!((&dm - dm.transpose()).amax() <= 1e-14 * dm.amax());
            assert!(dm.cholesky().is_some(), "{kind} l={l}");
        }
    }
}

#[test]
fn degrees_of_freedom_match_tabulated_counts() {
    let jginf = [(10, 256), (20, 1661), (30, 5216), (40, 11_921)];
    for (n, want) in jginf {
        assert_eq!(degrees_of_freedom(BasisKind::JgInf, n, n), want, "JGinf N={n}");
    }
    for (n, want) in [(10, 726), (20, 4851)] {
        assert_eq!(degrees_of_freedom(BasisKind::Jg1, n, n), want, "JG1 N={n}");
    }
    // the same count formula at N = 30, 40 gives 15376 / 35301, not the tabulated 14383 / 33281
    for (n, want) in [(30usize, 15_376), (40, 35_301)] {
        let sum: usize = (0..=n).step_by(2).map(|l| (2 * l + 1) * (n + 1)).sum();
        assert_eq!(sum, want);
        assert_eq!(degrees_of_freedom(BasisKind::Jg1, n, n), want);
    }
}
