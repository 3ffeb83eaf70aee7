//! Manufactured-solution convergence study.
//!
//! The exact solution is `f = f_D(q) e^{−1/t}` where `f_D ∝ (1−|q|²)^{b/2}
//! exp((De/2) D:qq)` is the steady state for the irrotational flow `K = D`,
//! driven by the source `t^{−2} f_D e^{−1/t}`.

use crate::error::Result;
use crate::field::{to_cartesian, weighted_l2_error};
use crate::radial::BasisKind;
use crate::solver::{assemble_operator, run_simulation, RunOptions, SeparableSource, SolverConfig, SpectralState};
use serde::Serialize;
use std::time::Duration;

/// Extra quadrature points beyond the expansion degree for projections and
/// error norms.
pub const MMS_GRID_EXTRA: usize = 30;

/// Parameters of the manufactured problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MmsProblem {
    pub b: f64,
    pub s: f64,
    pub de: f64,
    pub k: [[f64; 3]; 3],
    pub t0: f64,
    pub t_end: f64,
    pub dt: f64,
}

impl Default for MmsProblem {
    fn default() -> Self {
        Self {
            b: 12.0,
            s: 6.0,
            de: 24.0,
            k: [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 0.0]],
            t0: 0.5,
            t_end: 1.0,
            dt: 1e-4,
        }
    }
}

impl MmsProblem {
    /// Solver configuration with `L = N = n`.
    pub fn config(&self, basis: BasisKind, n: usize) -> SolverConfig {
        SolverConfig {
            b: self.b,
            s: self.s,
            de: self.de,
            k: self.k,
            l_max: n,
            n_max: n,
            dt: self.dt,
            basis,
            t0: self.t0,
            t_end: self.t_end,
            allow_unstable_dt: false,
        }
    }

    /// Unnormalized steady profile `h_D = (1−r²)^{b/2−s} exp((De/2) D:qq)`
    /// in mapped coordinates.
    pub fn steady_h(&self, p: f64, theta: f64, phi: f64) -> f64 {
        let r = (0.5 * (1.0 + p)).max(0.0).sqrt();
        let q = to_cartesian(r, theta, phi);
        let mut dqq = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                dqq += 0.5 * (self.k[i][j] + self.k[j][i]) * q[i] * q[j];
            }
        }
        (0.5 * (1.0 - p)).powf(0.5 * self.b - self.s) * (0.5 * self.de * dqq).exp()
    }

    /// Time factor of the exact solution.
    pub fn time_factor(t: f64) -> f64 {
        (-1.0 / t).exp()
    }
}

/// One row of the convergence table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MmsResult {
    pub basis: BasisKind,
    pub n: usize,
    pub dof: usize,
    pub dt: f64,
    pub steps: usize,
    pub error: f64,
    /// Wall-clock seconds of the time loop only.
    pub solve_seconds: f64,
}

/// Runs the manufactured problem at `L = N = n` and measures the relative
/// weighted L² error at the final time.
pub fn run_mms(problem: &MmsProblem, basis: BasisKind, n: usize, budget: Option<Duration>) -> Result<MmsResult> {
    let cfg = problem.config(basis, n);
    let op = assemble_operator(&cfg)?;
    let grid = op.projection_grid(MMS_GRID_EXTRA)?;
    let steady = |p: f64, t: f64, f: f64| problem.steady_h(p, t, f);
    let c_steady = op.project(&grid, steady);
    let source = SeparableSource {
        vector: op.source_vector(&grid, steady),
        amplitude: Box::new(|t| MmsProblem::time_factor(t) / (t * t)),
    };
    let level = |t: f64| SpectralState {
        coeffs: c_steady.iter().map(|c| c * MmsProblem::time_factor(t)).collect(),
        time: t,
    };
    let prev = level(cfg.t0);
    let cur = level(cfg.t0 + cfg.dt);
    let opts = RunOptions {
        record_every: 0,
        budget,
        ..RunOptions::default()
    };
    let out = run_simulation(&op, &cur, Some(&prev), Some(&source), &opts)?;
    let scale = MmsProblem::time_factor(out.state.time);
    let error = weighted_l2_error(&grid, &out.state.coeffs, |p, t, f| scale * problem.steady_h(p, t, f))?;
    Ok(MmsResult {
        basis,
        n,
        dof: op.len(),
        dt: cfg.dt,
        steps: out.steps,
        error,
        solve_seconds: out.elapsed.as_secs_f64(),
    })
}
