//! Quasi-equilibrium density `(1−|q|²)^{b/2} exp(λ:qq) / Z` in the
//! eigenframe: forward moment map, its covariance Jacobian and the Newton
//! inverse.
//!
//! With `q = √t u`, the radial integrals `G_k(A) = ∫₀¹ (1−t)^{b/2} t^{k+1/2}
//! e^{At} dt` depend only on `A = λ:uu`. They are tabulated once per `b` as
//! piecewise Chebyshev series of `ln G_k`, so each moment evaluation is a
//! sum over directions on the sphere.

use crate::error::{invalid, Error, Result};
use crate::special::{gauss_jacobi_rule, gauss_legendre_rule, ln_gamma};
use nalgebra::{Matrix3, Vector3};
use std::f64::consts::PI;

/// `Γ(b/2 + 5/2) / (2 π^{3/2} Γ(b/2 + 1))`. It normalizes `(1−|q|²)^{b/2}`
/// over half the unit ball (one of the two head-tail images); over the full
/// ball the integral is 1/2.
pub fn equilibrium_constant(b: f64) -> Result<f64> {
    if !(b > 0.0) || !b.is_finite() {
        return Err(invalid(format!("extensibility b must be positive, got {b}")));
    }
    Ok((ln_gamma(0.5 * b + 2.5) - ln_gamma(0.5 * b + 1.0)).exp() / (2.0 * PI.powf(1.5)))
}

/// Equilibrium second moment per axis, `1/(b+5)`.
pub fn equilibrium_moment(b: f64) -> f64 {
    1.0 / (b + 5.0)
}

const SEGMENT_WIDTH: f64 = 8.0;
const SEGMENT_DEGREE: usize = 24;
/// Exponent range covered by the radial tables.
pub const EXPONENT_RANGE: (f64, f64) = (-480.0, 1200.0);
// spreads λ_max − λ_min handled by each angular rule
const SPREAD_TIERS: [f64; 6] = [8.0, 32.0, 128.0, 512.0, 1200.0, 1680.0];

#[derive(Debug, Clone)]
struct ChebyshevPieces {
    lo: f64,
    width: f64,
    // [segment][k][coefficient]
    coeffs: Vec<[[f64; SEGMENT_DEGREE + 1]; 3]>,
}

impl ChebyshevPieces {
    #[inline]
    fn eval(&self, a: f64) -> [f64; 3] {
        let pos = (a - self.lo) / self.width;
        let seg = (pos.floor().max(0.0) as usize).min(self.coeffs.len() - 1);
        let x = 2.0 * (pos - seg as f64) - 1.0;
        let c = &self.coeffs[seg];
        let mut out = [0.0; 3];
        for (k, o) in out.iter_mut().enumerate() {
            let (mut b1, mut b2) = (0.0, 0.0);
            for j in (1..=SEGMENT_DEGREE).rev() {
                let t = 2.0 * x * b1 - b2 + c[k][j];
                b2 = b1;
                b1 = t;
            }
            *o = x * b1 - b2 + c[k][0];
        }
        out
    }
}

/// Directions `(u₁², u₂², u₃², weight)` covering a quarter of the sphere,
/// accurate for exponents of spread up to `spread`.
#[derive(Debug, Clone)]
struct AngularRule {
    spread: f64,
    points: Vec<[f64; 4]>,
}

fn angular_rule(spread: f64) -> Result<AngularRule> {
    // Fourier/Legendre content of exp(A u·u) decays like exp(−k²/(2A)).
    let k = (28.0 * spread).sqrt() + 10.0;
    let nx_full = 2 * ((k / 2.0).ceil() as usize + 2);
    let m = 2 * ((k / 2.0).ceil() as usize + 2);
    let gl = gauss_legendre_rule(nx_full)?;
    let mut points = Vec::new();
    for (&x, &wx) in gl.nodes.iter().zip(&gl.weights) {
        if x <= 0.0 {
            continue;
        }
        let s2 = 1.0 - x * x;
        // trapezoid over one period [0, π) of cos 2φ, folded by φ → π − φ
        for j in 0..=m / 2 {
            let phi = j as f64 * PI / m as f64;
            let fold = if j == 0 || j == m / 2 { 1.0 } else { 2.0 };
            let w = wx * fold * PI / m as f64;
            let (c, s) = (phi.cos(), phi.sin());
            points.push([s2 * c * c, s2 * s * s, x * x, w]);
        }
    }
    Ok(AngularRule { spread, points })
}

/// Moments of the quasi-equilibrium density for diagonal `λ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QeMoments {
    /// `⟨q_i²⟩`.
    pub c: [f64; 3],
    /// `Cov(q_i², q_j²) = ∂c_i/∂λ_j`.
    pub cov: [[f64; 3]; 3],
    /// `ln Z` with `Z = ∫ (1−|q|²)^{b/2} exp(λ:qq) dq`.
    pub log_z: f64,
}

/// Tabulated radial integrals and angular rules for one value of `b`.
#[derive(Debug, Clone)]
pub struct QeIntegrator {
    pub b: f64,
    radial: ChebyshevPieces,
    rules: Vec<AngularRule>,
}

/// Scaled radial integrals `G_k(A) e^{−max(A,0)}` by Gauss–Jacobi quadrature.
fn radial_direct(b: f64, a: f64, rules: &[crate::special::QuadratureRule; 3]) -> [f64; 3] {
    let shift = a.max(0.0);
    let mut out = [0.0; 3];
    for (k, rule) in rules.iter().enumerate() {
        let scale = 2f64.powf(-(0.5 * b + k as f64 + 1.5));
        out[k] = scale
            * rule.integrate(|p| (0.5 * a * (1.0 + p) - shift).exp());
    }
    out
}

impl QeIntegrator {
    pub fn new(b: f64) -> Result<Self> {
        if !(b > 0.0) || !b.is_finite() {
            return Err(invalid(format!("extensibility b must be positive, got {b}")));
        }
        let n_pts = 320;
        let rules = [
            gauss_jacobi_rule(0.5 * b, 0.5, n_pts)?,
            gauss_jacobi_rule(0.5 * b, 1.5, n_pts)?,
            gauss_jacobi_rule(0.5 * b, 2.5, n_pts)?,
        ];
        let (lo, hi) = EXPONENT_RANGE;
        let n_seg = ((hi - lo) / SEGMENT_WIDTH).ceil() as usize;
        let nd = SEGMENT_DEGREE + 1;
        let mut coeffs = Vec::with_capacity(n_seg);
        for seg in 0..n_seg {
            let a0 = lo + seg as f64 * SEGMENT_WIDTH;
            let mut samples = vec![[0.0; 3]; nd];
            for (j, smp) in samples.iter_mut().enumerate() {
                let x = (PI * (j as f64 + 0.5) / nd as f64).cos();
                let a = a0 + 0.5 * (x + 1.0) * SEGMENT_WIDTH;
                let g = radial_direct(b, a, &rules);
                for k in 0..3 {
                    smp[k] = g[k].ln() + a.max(0.0);
                }
            }
            let mut c = [[0.0; SEGMENT_DEGREE + 1]; 3];
            for k in 0..3 {
                for (i, ci) in c[k].iter_mut().enumerate() {
                    let sum: f64 = samples
                        .iter()
                        .enumerate()
                        .map(|(j, s)| s[k] * (PI * i as f64 * (j as f64 + 0.5) / nd as f64).cos())
                        .sum();
                    *ci = sum * 2.0 / nd as f64;
                }
                c[k][0] *= 0.5;
            }
            coeffs.push(c);
        }
        let rules = SPREAD_TIERS
            .iter()
            .map(|&s| angular_rule(s))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            b,
            radial: ChebyshevPieces {
                lo,
                width: SEGMENT_WIDTH,
                coeffs,
            },
            rules,
        })
    }

    /// `ln G_k(A)` for `k = 0, 1, 2`.
    pub fn log_radial(&self, a: f64) -> Result<[f64; 3]> {
        let (lo, hi) = EXPONENT_RANGE;
        if !(lo..=hi).contains(&a) {
            return Err(Error::Quadrature(format!(
                "exponent {a} outside the tabulated range [{lo}, {hi}]"
            )));
        }
        Ok(self.radial.eval(a))
    }

    fn check(&self, lambda: [f64; 3]) -> Result<&AngularRule> {
        let (lo, hi) = EXPONENT_RANGE;
        let max = lambda.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = lambda.iter().copied().fold(f64::INFINITY, f64::min);
        if !(min >= lo && max <= hi) {
            return Err(Error::Quadrature(format!(
                "multipliers {lambda:?} outside the calibrated range [{lo}, {hi}]"
            )));
        }
        let spread = max - min;
        self.rules
            .iter()
            .find(|r| spread <= r.spread)
            .ok_or_else(|| Error::Quadrature(format!("multiplier spread {spread} beyond calibrated range")))
    }

    /// Second moments and their covariance for diagonal `λ`.
    pub fn moments(&self, lambda: [f64; 3]) -> Result<QeMoments> {
        let rule = self.check(lambda)?;
        Ok(self.moments_with(rule, lambda))
    }

    fn moments_with(&self, rule: &AngularRule, lambda: [f64; 3]) -> QeMoments {
        let shift = lambda.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        let mut m2 = [0.0; 3];
        let mut m4 = [[0.0; 3]; 3];
        for pt in &rule.points {
            let u = [pt[0], pt[1], pt[2]];
            let a = lambda[0] * u[0] + lambda[1] * u[1] + lambda[2] * u[2];
            let lg = self.radial.eval(a);
            let w = pt[3];
            let g0 = w * (lg[0] - shift).exp();
            let g1 = w * (lg[1] - shift).exp();
            let g2 = w * (lg[2] - shift).exp();
            z += g0;
            for i in 0..3 {
                m2[i] += g1 * u[i];
                for j in i..3 {
                    m4[i][j] += g2 * u[i] * u[j];
                }
            }
        }
        let c = [m2[0] / z, m2[1] / z, m2[2] / z];
        let mut cov = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in i..3 {
                let v = m4[i][j] / z - c[i] * c[j];
                cov[i][j] = v;
                cov[j][i] = v;
            }
        }
        // dq = ½ t^{1/2} dt dΩ; the rule covers a quarter of the sphere
        let log_z = (0.5 * 4.0 * z).ln() + shift;
        QeMoments { c, cov, log_z }
    }

    /// `c_i = ⟨q_i²⟩` for diagonal `λ`.
    pub fn forward(&self, lambda: [f64; 3]) -> Result<[f64; 3]> {
        Ok(self.moments(lambda)?.c)
    }

    /// Multipliers reproducing the diagonal second moments `c`.
    pub fn invert(&self, c: [f64; 3]) -> Result<NewtonReport> {
        self.invert_from(c, None)
    }

    /// Newton inverse with an optional starting guess.
    pub fn invert_from(&self, c: [f64; 3], guess: Option<[f64; 3]>) -> Result<NewtonReport> {
        check_admissible(c)?;
        let (lo, hi) = EXPONENT_RANGE;
        let mut lam = guess.unwrap_or_else(|| {
            let eq = 0.5 / equilibrium_moment(self.b);
            c.map(|ci| (eq - 0.5 / ci).clamp(lo + 1.0, hi - 1.0))
        });
        let target = Vector3::from(c);
        let mut m = self.moments(lam)?;
        let mut res = Vector3::from(m.c) - target;
        for it in 0..NEWTON_MAX_ITER {
            let rnorm = res.amax();
            if rnorm < NEWTON_TOL {
                return Ok(NewtonReport {
                    lambda: lam,
                    iterations: it,
                    residual: rnorm,
                });
            }
            let jac = Matrix3::from_fn(|i, j| m.cov[i][j]);
            let step = jac
                .lu()
                .solve(&(-res))
                .ok_or_else(|| Error::Singular("quasi-equilibrium covariance".into()))?;
            // cap the step, then backtrack until the residual drops
            let cap = 50.0_f64.max(0.5 * Vector3::from(lam).amax());
            let mut alpha = if step.amax() > cap { cap / step.amax() } else { 1.0 };
            let mut accepted = false;
            for _ in 0..40 {
                let trial = [
                    lam[0] + alpha * step[0],
                    lam[1] + alpha * step[1],
                    lam[2] + alpha * step[2],
                ];
                if let Ok(mt) = self.moments(trial) {
                    let rt = Vector3::from(mt.c) - target;
                    if rt.amax() < rnorm {
                        lam = trial;
                        m = mt;
                        res = rt;
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !accepted {
                return Err(Error::NoConvergence {
                    iterations: it,
                    residual: rnorm,
                });
            }
        }
        Err(Error::NoConvergence {
            iterations: NEWTON_MAX_ITER,
            residual: res.amax(),
        })
    }
}

const NEWTON_TOL: f64 = 1e-11;
const NEWTON_MAX_ITER: usize = 100;

/// Result of the Newton inverse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonReport {
    pub lambda: [f64; 3],
    pub iterations: usize,
    pub residual: f64,
}

/// Positive entries with sum below one.
pub fn check_admissible(c: [f64; 3]) -> Result<()> {
    if c.iter().any(|v| !v.is_finite() || *v <= 0.0) {
        return Err(Error::Inadmissible(format!("eigenvalues {c:?} must be positive")));
    }
    let tr = c.iter().sum::<f64>();
    if tr >= 1.0 {
        return Err(Error::Inadmissible(format!("trace {tr} must stay below 1")));
    }
    Ok(())
}

/// `qe_forward`: second moments for sorted diagonal multipliers.
pub fn qe_forward(integrator: &QeIntegrator, lambda: [f64; 3]) -> Result<[f64; 3]> {
    integrator.forward(lambda)
}

/// `qe_invert_newton`: multipliers for admissible diagonal moments.
pub fn qe_invert_newton(integrator: &QeIntegrator, c: [f64; 3]) -> Result<[f64; 3]> {
    Ok(integrator.invert(c)?.lambda)
}

/// Density `(1−|q|²)^{b/2} exp(q·λq) / Z` for a full symmetric `λ`.
pub fn qe_density(b: f64, lambda: &[[f64; 3]; 3], log_z: f64, q: [f64; 3]) -> f64 {
    let r2 = q[0] * q[0] + q[1] * q[1] + q[2] * q[2];
    if r2 >= 1.0 {
        return 0.0;
    }
    let mut e = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            e += q[i] * lambda[i][j] * q[j];
        }
    }
    (0.5 * b * (1.0 - r2).ln() + e - log_z).exp()
}
