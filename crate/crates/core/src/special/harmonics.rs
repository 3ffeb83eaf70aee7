//! Real spherical harmonics `Y_{lm}^v(θ, φ) = P̄_l^m(cos θ) e_m^v(φ)`.

use super::legendre::{assoc_legendre_norm, assoc_legendre_norm_with_dtheta};
use crate::error::{invalid, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Degree `l`, order `m` and parity flag `v` (0 = cosine branch, 1 = sine branch).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HarmonicIndex {
    pub l: usize,
    pub m: usize,
    pub v: u8,
}

impl HarmonicIndex {
    pub fn new(l: usize, m: usize, v: u8) -> Result<Self> {
        let idx = Self { l, m, v };
        idx.validate()?;
        Ok(idx)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m > self.l {
            return Err(invalid(format!("order {} exceeds degree {}", self.m, self.l)));
        }
        if self.v > 1 {
            return Err(invalid(format!("parity flag must be 0 or 1, got {}", self.v)));
        }
        if self.v == 1 && self.m == 0 {
            return Err(invalid("sine branch (v = 1) requires m >= 1"));
        }
        Ok(())
    }
}

/// Azimuthal factor `e_m^v(φ)`.
#[inline]
pub fn azimuthal(m: usize, v: u8, phi: f64) -> f64 {
    if m == 0 {
        1.0 / (2.0 * PI).sqrt()
    } else if v == 0 {
        (m as f64 * phi).cos() / PI.sqrt()
    } else {
        (m as f64 * phi).sin() / PI.sqrt()
    }
}

/// `∂_φ e_m^v(φ)`.
#[inline]
pub fn azimuthal_dphi(m: usize, v: u8, phi: f64) -> f64 {
    let mf = m as f64;
    if m == 0 {
        0.0
    } else if v == 0 {
        -mf * (mf * phi).sin() / PI.sqrt()
    } else {
        mf * (mf * phi).cos() / PI.sqrt()
    }
}

pub fn real_spherical_harmonic(idx: HarmonicIndex, theta: f64, phi: f64) -> Result<f64> {
    idx.validate()?;
    Ok(assoc_legendre_norm(idx.l, idx.m, theta.cos())? * azimuthal(idx.m, idx.v, phi))
}

/// `(Y, ∂_θ Y, ∂_φ Y)` at a point.
pub fn real_spherical_harmonic_with_gradient(
    idx: HarmonicIndex,
    theta: f64,
    phi: f64,
) -> Result<(f64, f64, f64)> {
    idx.validate()?;
    let (p, dp) = assoc_legendre_norm_with_dtheta(idx.l, idx.m, theta)?;
    let e = azimuthal(idx.m, idx.v, phi);
    let de = azimuthal_dphi(idx.m, idx.v, phi);
    Ok((p * e, dp * e, p * de))
}
