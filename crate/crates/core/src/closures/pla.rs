//! Piecewise-linear lookup of the sorted moment-to-multiplier map.
//!
//! Nodes live on a structured grid in coordinates `(ξ, w₃, w₂)`:
//! `ξ = logit(tr C)`, and `w₃`, `w₂` place the fractions `a₃ = c₃/tr C` and
//! `a₂ = c₂/tr C` geometrically between their sorted-simplex bounds. Lookup
//! is trilinear in these coordinates and acts on the regularized multipliers
//! `νᵢ = (1 − tr C)(λᵢ + 1/(2cᵢ))`, which stay close to `b/2 + 1` while `λ`
//! itself diverges as `cᵢ → 0` or `tr C → 1`. The isotropic profile
//! `ν(tr C · 𝟙/3)` is subtracted first and restored from a fine 1D table.

use super::qe::{check_admissible, QeIntegrator};
use crate::error::{invalid, Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};

pub const PLA_SCHEMA: &str = "fene-pla-table/1";

/// Grid extent and resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaGridSpec {
    pub t_min: f64,
    pub t_max: f64,
    /// Smallest eigenvalue covered.
    pub c_floor: f64,
    pub shape: [usize; 3],
}

impl Default for PlaGridSpec {
    fn default() -> Self {
        Self {
            t_min: 0.02,
            t_max: 0.98,
            c_floor: 2e-3,
            shape: [40, 40, 40],
        }
    }
}

/// Nodes of the isotropic baseline over the trace range.
pub const BASELINE_NODES: usize = 2001;

impl PlaGridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.t_min && self.t_min < self.t_max && self.t_max < 1.0) {
            return Err(invalid(format!(
                "trace range must satisfy 0 < t_min < t_max < 1, got [{}, {}]",
                self.t_min, self.t_max
            )));
        }
        if !(self.c_floor > 0.0 && self.c_floor < self.t_min / 3.0) {
            return Err(invalid(format!(
                "c_floor must lie in (0, t_min/3), got {}",
                self.c_floor
            )));
        }
        if self.shape.iter().any(|&n| n < 2) {
            return Err(invalid("every grid axis needs at least 2 nodes"));
        }
        Ok(())
    }

    fn a3_min(&self, t: f64) -> f64 {
        (self.c_floor / t).min(1.0 / 3.0)
    }

    /// Sorted eigenvalues at continuous grid coordinates in `[0, 1]³`.
    pub fn point(&self, w: [f64; 3]) -> [f64; 3] {
        let t = self.t_min + w[0] * (self.t_max - self.t_min);
        let lo3 = self.a3_min(t);
        let a3 = (lo3 + w[1] * (1.0 / 3.0 - lo3)).min(1.0 / 3.0);
        let hi2 = (0.5 * (1.0 - a3)).max(a3);
        let a2 = (a3 + w[2] * (hi2 - a3)).clamp(a3, hi2);
        let a1 = (1.0 - a2 - a3).max(a2);
        [t * a1, t * a2, t * a3]
    }

    /// Grid coordinates in `[0, 1]³` (unclamped) of sorted eigenvalues.
    pub fn coordinates(&self, c: [f64; 3]) -> [f64; 3] {
        let t = c[0] + c[1] + c[2];
        let w0 = (t - self.t_min) / (self.t_max - self.t_min);
        let lo3 = self.a3_min(t.clamp(self.t_min, self.t_max));
        let (a2, a3) = (c[1] / t, c[2] / t);
        let span3 = 1.0 / 3.0 - lo3;
        let w1 = if span3 > 0.0 { (a3 - lo3) / span3 } else { 0.0 };
        let span2 = 0.5 * (1.0 - a3) - a3;
        let w2 = if span2 > 1e-14 { (a2 - a3) / span2 } else { 0.0 };
        [w0, w1, w2]
    }
}

/// Multipliers on the grid nodes, with the grid metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaTable {
    pub schema: String,
    pub b: f64,
    pub grid: PlaGridSpec,
    /// Largest Newton residual over the nodes.
    pub build_residual: f64,
    /// `[i0][i1][i2][k]`, row-major.
    pub lambda: Vec<f64>,
    /// Regularized isotropic multiplier at `BASELINE_NODES` equispaced traces.
    pub baseline: Vec<f64>,
    #[serde(skip)]
    regular: Vec<f64>,
}

fn regularize(c: [f64; 3], lambda: [f64; 3]) -> [f64; 3] {
    let gap = 1.0 - (c[0] + c[1] + c[2]);
    [0, 1, 2].map(|k| gap * (lambda[k] + 0.5 / c[k]))
}

fn deregularize(c: [f64; 3], nu: [f64; 3]) -> [f64; 3] {
    let gap = 1.0 - (c[0] + c[1] + c[2]);
    [0, 1, 2].map(|k| nu[k] / gap - 0.5 / c[k])
}

/// Linear interpolation of the isotropic baseline at trace `t`.
fn baseline_at(grid: &PlaGridSpec, baseline: &[f64], t: f64) -> f64 {
    let n = baseline.len() - 1;
    let x = ((t - grid.t_min) / (grid.t_max - grid.t_min) * n as f64).clamp(0.0, n as f64);
    let i = (x.floor() as usize).min(n - 1);
    let f = x - i as f64;
    (1.0 - f) * baseline[i] + f * baseline[i + 1]
}

static CLAMP_WARNED: AtomicBool = AtomicBool::new(false);

impl PlaTable {
    fn index(&self, i: [usize; 3]) -> usize {
        let s = self.grid.shape;
        ((i[0] * s[1] + i[1]) * s[2] + i[2]) * 3
    }

    /// Stored multipliers at node `i`.
    pub fn node(&self, i: [usize; 3]) -> [f64; 3] {
        let k = self.index(i);
        [self.lambda[k], self.lambda[k + 1], self.lambda[k + 2]]
    }

    /// Sorted eigenvalues at node `i`.
    pub fn node_point(&self, i: [usize; 3]) -> [f64; 3] {
        let s = self.grid.shape;
        self.grid.point([
            i[0] as f64 / (s[0] - 1) as f64,
            i[1] as f64 / (s[1] - 1) as f64,
            i[2] as f64 / (s[2] - 1) as f64,
        ])
    }

    /// Trilinear interpolation at sorted admissible eigenvalues; queries
    /// outside the grid are clamped to its boundary.
    pub fn lookup(&self, c: [f64; 3]) -> Result<[f64; 3]> {
        check_admissible(c)?;
        if !(c[0] >= c[1] && c[1] >= c[2]) {
            return Err(invalid(format!("lookup needs sorted eigenvalues, got {c:?}")));
        }
        let w = self.grid.coordinates(c);
        let s = self.grid.shape;
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        let mut clamped = false;
        for d in 0..3 {
            let x = w[d] * (s[d] - 1) as f64;
            let xc = x.clamp(0.0, (s[d] - 1) as f64);
            clamped |= (xc - x).abs() > 1e-12;
            let i = (xc.floor() as usize).min(s[d] - 2);
            base[d] = i;
            frac[d] = xc - i as f64;
        }
        let c = if clamped {
            self.grid.point([0, 1, 2].map(|d| (base[d] as f64 + frac[d]) / (s[d] - 1) as f64))
        } else {
            c
        };
        if clamped && !CLAMP_WARNED.swap(true, Ordering::Relaxed) {
            log::warn!("moment lookup {c:?} lies outside the table grid; clamping to its boundary");
        }
        let mut out = [0.0; 3];
        for corner in 0..8 {
            let mut wgt = 1.0;
            let mut idx = base;
            for d in 0..3 {
                if corner >> d & 1 == 1 {
                    idx[d] += 1;
                    wgt *= frac[d];
                } else {
                    wgt *= 1.0 - frac[d];
                }
            }
            if wgt == 0.0 {
                continue;
            }
            let k0 = self.index(idx);
            for k in 0..3 {
                out[k] += wgt * self.regular[k0 + k];
            }
        }
        let base = baseline_at(&self.grid, &self.baseline, c[0] + c[1] + c[2]);
        Ok(deregularize(c, out.map(|v| v + base)))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(f, self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut t: PlaTable = serde_json::from_reader(f)?;
        t.validate()?;
        t.fill_regular();
        Ok(t)
    }

    fn fill_regular(&mut self) {
        let s = self.grid.shape;
        self.regular = vec![0.0; self.lambda.len()];
        for i0 in 0..s[0] {
            for i1 in 0..s[1] {
                for i2 in 0..s[2] {
                    let i = [i0, i1, i2];
                    let k = self.index(i);
                    let c = self.node_point(i);
                    let base = baseline_at(&self.grid, &self.baseline, c[0] + c[1] + c[2]);
                    let nu = regularize(c, self.node(i)).map(|v| v - base);
                    self.regular[k..k + 3].copy_from_slice(&nu);
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != PLA_SCHEMA {
            return Err(Error::Format(format!(
                "unsupported table schema {:?}, expected {PLA_SCHEMA:?}",
                self.schema
            )));
        }
        self.grid.validate()?;
        let n: usize = self.grid.shape.iter().product();
        if self.lambda.len() != 3 * n {
            return Err(Error::Format(format!(
                "table holds {} values, grid needs {}",
                self.lambda.len(),
                3 * n
            )));
        }
        if self.baseline.len() < 2 {
            return Err(Error::Format("isotropic baseline needs at least 2 nodes".into()));
        }
        if self.lambda.iter().chain(&self.baseline).any(|v| !v.is_finite()) {
            return Err(Error::Format("table contains non-finite values".into()));
        }
        Ok(())
    }
}

/// Fills every node with the Newton inverse, warm-started from the
/// regularized multipliers of the previous node along the fastest axis.
pub fn pla_build_table(integrator: &QeIntegrator, grid: PlaGridSpec) -> Result<PlaTable> {
    grid.validate()?;
    let s = grid.shape;
    let mut table = PlaTable {
        schema: PLA_SCHEMA.to_string(),
        b: integrator.b,
        grid,
        build_residual: 0.0,
        lambda: vec![0.0; 3 * s[0] * s[1] * s[2]],
        baseline: Vec::with_capacity(BASELINE_NODES),
        regular: Vec::new(),
    };
    let mut guess: Option<[f64; 3]> = None;
    for j in 0..BASELINE_NODES {
        let t = grid.t_min + (grid.t_max - grid.t_min) * j as f64 / (BASELINE_NODES - 1) as f64;
        let c = [t / 3.0; 3];
        let report = match integrator.invert_from(c, guess) {
            Ok(r) => r,
            Err(_) => integrator.invert(c)?,
        };
        guess = Some(report.lambda);
        table.build_residual = table.build_residual.max(report.residual);
        table.baseline.push(regularize(c, report.lambda)[0]);
    }
    let mut row_start: Option<[f64; 3]> = None;
    for i0 in 0..s[0] {
        for i1 in 0..s[1] {
            let mut prev = row_start;
            for i2 in 0..s[2] {
                let c = table.node_point([i0, i1, i2]);
                let guess = prev.map(|nu| deregularize(c, nu));
                let report = match integrator.invert_from(c, guess) {
                    Ok(r) => r,
                    Err(_) => integrator.invert(c)?,
                };
                let nu = regularize(c, report.lambda);
                if i2 == 0 {
                    row_start = Some(nu);
                }
                prev = Some(nu);
                table.build_residual = table.build_residual.max(report.residual);
                let k = table.index([i0, i1, i2]);
                table.lambda[k..k + 3].copy_from_slice(&report.lambda);
            }
        }
    }
    table.fill_regular();
    Ok(table)
}

/// Trilinear table lookup.
pub fn pla_lookup(table: &PlaTable, c_sorted: [f64; 3]) -> Result<[f64; 3]> {
    table.lookup(c_sorted)
}
