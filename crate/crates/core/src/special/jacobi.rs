//! Jacobi polynomials `J_n^{α,β}` and their Gauss quadrature rules.

use crate::error::{invalid, Error, Result};
use std::f64::consts::PI;

fn check_exponents(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha > -1.0 && beta > -1.0) || !alpha.is_finite() || !beta.is_finite() {
        return Err(invalid(format!(
            "Jacobi exponents must exceed -1 (alpha = {alpha}, beta = {beta})"
        )));
    }
    Ok(())
}

/// `J_n^{α,β}(x)` by the three-term recurrence.
pub fn jacobi_eval(alpha: f64, beta: f64, n: usize, x: f64) -> Result<f64> {
    check_exponents(alpha, beta)?;
    Ok(jacobi_value(alpha, beta, n, x))
}

/// `(J_n^{α,β}(x), d/dx J_n^{α,β}(x))`.
pub fn jacobi_eval_with_derivative(alpha: f64, beta: f64, n: usize, x: f64) -> Result<(f64, f64)> {
    check_exponents(alpha, beta)?;
    Ok(jacobi_value_and_derivative(alpha, beta, n, x))
}

pub(crate) fn jacobi_value(alpha: f64, beta: f64, n: usize, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let ab = alpha + beta;
    let mut cur = 0.5 * ((ab + 2.0) * x + (alpha - beta));
    for k in 1..n {
        let next = recurrence_step(alpha, beta, k, x, cur, prev);
        prev = cur;
        cur = next;
    }
    cur
}

pub(crate) fn jacobi_value_and_derivative(alpha: f64, beta: f64, n: usize, x: f64) -> (f64, f64) {
    let value = jacobi_value(alpha, beta, n, x);
    if n == 0 {
        return (value, 0.0);
    }
    let scale = 0.5 * (n as f64 + alpha + beta + 1.0);
    (value, scale * jacobi_value(alpha + 1.0, beta + 1.0, n - 1, x))
}

/// Fills `out[k] = J_k^{α,β}(x)` for `k = 0..out.len()`.
pub(crate) fn jacobi_all(alpha: f64, beta: f64, x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() == 1 {
        return;
    }
    out[1] = 0.5 * ((alpha + beta + 2.0) * x + (alpha - beta));
    for k in 1..out.len() - 1 {
        out[k + 1] = recurrence_step(alpha, beta, k, x, out[k], out[k - 1]);
    }
}

/// Fills values and derivatives of `J_k^{α,β}` for `k = 0..values.len()`.
pub(crate) fn jacobi_all_with_derivative(
    alpha: f64,
    beta: f64,
    x: f64,
    values: &mut [f64],
    derivs: &mut [f64],
) {
    debug_assert_eq!(values.len(), derivs.len());
    jacobi_all(alpha, beta, x, values);
    if derivs.is_empty() {
        return;
    }
    derivs[0] = 0.0;
    if derivs.len() > 1 {
        // d/dx J_k^{a,b} = (k+a+b+1)/2 J_{k-1}^{a+1,b+1}
        jacobi_all(alpha + 1.0, beta + 1.0, x, &mut derivs[1..]);
        for (k, d) in derivs.iter_mut().enumerate().skip(1) {
            *d *= 0.5 * (k as f64 + alpha + beta + 1.0);
        }
    }
}

#[inline]
fn recurrence_step(alpha: f64, beta: f64, k: usize, x: f64, cur: f64, prev: f64) -> f64 {
    let k = k as f64;
    let c = 2.0 * k + alpha + beta;
    let a1 = 2.0 * (k + 1.0) * (k + alpha + beta + 1.0) * c;
    let a2 = (c + 1.0) * (alpha * alpha - beta * beta);
    let a3 = c * (c + 1.0) * (c + 2.0);
    let a4 = 2.0 * (k + alpha) * (k + beta) * (c + 2.0);
    ((a2 + a3 * x) * cur - a4 * prev) / a1
}

pub(crate) fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// `∫₋₁¹ (1−p)^α (1+p)^β dp = 2^{α+β+1} B(α+1, β+1)`.
pub fn jacobi_weight_integral(alpha: f64, beta: f64) -> f64 {
    ((alpha + beta + 1.0) * std::f64::consts::LN_2 + ln_gamma(alpha + 1.0) + ln_gamma(beta + 1.0)
        - ln_gamma(alpha + beta + 2.0))
        .exp()
}

/// Squared weighted norm `∫ (J_n^{α,β})² (1−p)^α (1+p)^β dp`.
pub fn jacobi_norm_sq(alpha: f64, beta: f64, n: usize) -> f64 {
    if n == 0 {
        return jacobi_weight_integral(alpha, beta);
    }
    let nf = n as f64;
    let ln = (alpha + beta + 1.0) * std::f64::consts::LN_2 + ln_gamma(nf + alpha + 1.0)
        + ln_gamma(nf + beta + 1.0)
        - ln_gamma(nf + alpha + beta + 1.0)
        - ln_gamma(nf + 1.0);
    ln.exp() / (2.0 * nf + alpha + beta + 1.0)
}

/// Gauss quadrature rule for the weight `(1−p)^α (1+p)^β` on `[−1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub alpha: f64,
    pub beta: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `Σ w_k f(x_k)`, i.e. `∫ f(p) (1−p)^α (1+p)^β dp` for polynomial `f`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Gauss–Jacobi nodes and weights, exact for polynomials of degree `2·npts − 1`.
///
/// Nodes are Newton-refined roots of `J_npts^{α,β}` started from Chebyshev
/// points, with deflation against roots already found; weights come from the
/// derivative formula.
pub fn gauss_jacobi_rule(alpha: f64, beta: f64, npts: usize) -> Result<QuadratureRule> {
    check_exponents(alpha, beta)?;
    if npts == 0 {
        return Err(invalid("quadrature rule needs at least one point"));
    }
    let n = npts;
    let mut nodes: Vec<f64> = Vec::with_capacity(n);
    for k in 0..n {
        let cheb = -((2 * k + 1) as f64 * PI / (2 * n) as f64).cos();
        let mut x = match nodes.last() {
            Some(&prev) => 0.5 * (cheb + prev),
            None => cheb,
        };
        let mut last_step = f64::INFINITY;
        for _ in 0..200 {
            let (p, dp) = jacobi_value_and_derivative(alpha, beta, n, x);
            let deflation: f64 = nodes.iter().map(|&r| 1.0 / (x - r)).sum();
            let delta = p / (dp - p * deflation);
            if !delta.is_finite() {
                break;
            }
            x -= delta;
            last_step = delta.abs();
            if last_step <= 4e-16 {
                break;
            }
        }
        if !(last_step < 1e-12) || !(x > -1.0 && x < 1.0) {
            return Err(Error::Quadrature(format!(
                "Newton iteration failed for root {k} of J_{n}^({alpha},{beta})"
            )));
        }
        // one polishing step on the undeflated polynomial
        let (p, dp) = jacobi_value_and_derivative(alpha, beta, n, x);
        if dp != 0.0 {
            let corrected = x - p / dp;
            if (corrected - x).abs() < 1e-12 {
                x = corrected;
            }
        }
        nodes.push(x);
    }
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for w in nodes.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::Quadrature(format!(
                "coincident Gauss-Jacobi nodes for n = {n}, alpha = {alpha}, beta = {beta}"
            )));
        }
    }

    let nf = n as f64;
    let ln_const = (alpha + beta + 1.0) * std::f64::consts::LN_2 + ln_gamma(nf + alpha + 1.0)
        + ln_gamma(nf + beta + 1.0)
        - ln_gamma(nf + alpha + beta + 1.0)
        - ln_gamma(nf + 1.0);
    let weights = nodes
        .iter()
        .map(|&x| {
            let (_, dp) = jacobi_value_and_derivative(alpha, beta, n, x);
            (ln_const - ((1.0 - x * x) * dp * dp).ln()).exp()
        })
        .collect();
    Ok(QuadratureRule {
        alpha,
        beta,
        nodes,
        weights,
    })
}

/// Gauss–Legendre rule on `[−1, 1]`.
pub fn gauss_legendre_rule(npts: usize) -> Result<QuadratureRule> {
    gauss_jacobi_rule(0.0, 0.0, npts)
}
