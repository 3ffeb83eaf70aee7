//! Normalized associated Legendre functions `P̄_l^m = C_l^m P_l^m` with
//! `C_l^m = sqrt((2l+1)(l−m)!/(2(l+m)!))`, so that `∫₋₁¹ (P̄_l^m)² dx = 1`.
//!
//! No Condon–Shortley phase is applied. Values come from the fully normalized
//! recurrence, which stays in range up to high degree without factorials.

use crate::error::{invalid, Result};

#[inline]
pub(crate) fn tri_index(l: usize, m: usize) -> usize {
    l * (l + 1) / 2 + m
}

/// `P̄_l^m(x)` for every `0 ≤ m ≤ l ≤ l_max` at a single abscissa, plus the
/// θ-derivative `d/dθ P̄_l^m(cos θ)`.
#[derive(Debug, Clone)]
pub struct LegendreTable {
    pub l_max: usize,
    pub x: f64,
    values: Vec<f64>,
    dtheta: Vec<f64>,
}

impl LegendreTable {
    pub fn new(l_max: usize, x: f64) -> Self {
        let values = normalized_table(l_max, x);
        let mut dtheta = vec![0.0; values.len()];
        for l in 0..=l_max {
            let lf = l as f64;
            for m in 0..=l {
                let up = if m < l { values[tri_index(l, m + 1)] } else { 0.0 };
                let mf = m as f64;
                dtheta[tri_index(l, m)] = if m == 0 {
                    -(lf * (lf + 1.0)).sqrt() * up
                } else {
                    let down = values[tri_index(l, m - 1)];
                    0.5 * (((lf + mf) * (lf - mf + 1.0)).sqrt() * down
                        - ((lf - mf) * (lf + mf + 1.0)).sqrt() * up)
                };
            }
        }
        Self {
            l_max,
            x,
            values,
            dtheta,
        }
    }

    #[inline]
    pub fn value(&self, l: usize, m: usize) -> f64 {
        self.values[tri_index(l, m)]
    }

    #[inline]
    pub fn dtheta(&self, l: usize, m: usize) -> f64 {
        self.dtheta[tri_index(l, m)]
    }
}

fn normalized_table(l_max: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; tri_index(l_max, l_max) + 1];
    let sin_t = (1.0 - x * x).max(0.0).sqrt();
    let mut pmm = std::f64::consts::FRAC_1_SQRT_2;
    for m in 0..=l_max {
        if m > 0 {
            let mf = m as f64;
            pmm *= ((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * sin_t;
        }
        out[tri_index(m, m)] = pmm;
        if m == l_max {
            break;
        }
        let mf = m as f64;
        let mut p_prev = pmm;
        let mut p_cur = (2.0 * mf + 3.0).sqrt() * x * pmm;
        out[tri_index(m + 1, m)] = p_cur;
        for l in (m + 2)..=l_max {
            let lf = l as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = ((2.0 * lf + 1.0) * (lf + mf - 1.0) * (lf - mf - 1.0)
                / ((2.0 * lf - 3.0) * (lf * lf - mf * mf)))
                .sqrt();
            let p_next = a * x * p_cur - b * p_prev;
            p_prev = p_cur;
            p_cur = p_next;
            out[tri_index(l, m)] = p_cur;
        }
    }
    out
}

fn check_order(l: usize, m: usize) -> Result<()> {
    if m > l {
        return Err(invalid(format!("order m = {m} exceeds degree l = {l}")));
    }
    Ok(())
}

/// `P̄_l^m(x)`.
pub fn assoc_legendre_norm(l: usize, m: usize, x: f64) -> Result<f64> {
    check_order(l, m)?;
    Ok(normalized_table(l, x)[tri_index(l, m)])
}

/// `(P̄_l^m(cos θ), d/dθ P̄_l^m(cos θ))`.
pub fn assoc_legendre_norm_with_dtheta(l: usize, m: usize, theta: f64) -> Result<(f64, f64)> {
    check_order(l, m)?;
    let t = LegendreTable::new(l, theta.cos());
    Ok((t.value(l, m), t.dtheta(l, m)))
}
