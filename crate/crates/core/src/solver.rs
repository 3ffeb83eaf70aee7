//! Discrete Fokker–Planck system and its semi-implicit BDF2 time march.
//!
//! Diffusion and the spring potential are implicit, one banded factorization
//! per harmonic degree; convection is extrapolated explicitly with
//! `2hⁿ − hⁿ⁻¹`.

use crate::angular::{assemble_uvw_for, ConvectionCoupling};
use crate::banded::{BandedLu, BandedMatrix};
use crate::error::{invalid, Error, Result};
use crate::field::MomentEvaluator;
use crate::layout::{degrees_of_freedom, SpectralLayout};
use crate::radial::{build_radial_blocks_for, BasisKind, RadialBlockSet};
use crate::special::gauss_jacobi_rule;
use crate::transform::{GridSpec, SphericalGrid};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

/// Physical and discretization parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// FENE extensibility.
    pub b: f64,
    /// Weight index, `1 < s ≤ b/2`.
    pub s: f64,
    /// Deborah number.
    pub de: f64,
    /// Velocity gradient, traceless.
    pub k: [[f64; 3]; 3],
    /// Maximum harmonic degree (even).
    pub l_max: usize,
    /// Maximum radial degree.
    pub n_max: usize,
    pub dt: f64,
    pub basis: BasisKind,
    pub t0: f64,
    pub t_end: f64,
    /// Accept `dt` above the energy-stability bound.
    #[serde(default)]
    pub allow_unstable_dt: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            b: 12.0,
            s: 6.0,
            de: 1.0,
            k: [[0.0; 3]; 3],
            l_max: 10,
            n_max: 10,
            dt: 1e-3,
            basis: BasisKind::Jg1,
            t0: 0.0,
            t_end: 1.0,
            allow_unstable_dt: false,
        }
    }
}

/// Lower bound of the spring coercivity constant as a function of `s`:
/// `(3/4)(1 + (s−1)/3 + 3/(4(s−1)))`.
pub fn gamma_threshold(s: f64) -> Result<f64> {
    if !(s > 1.0) {
        return Err(invalid(format!("weight index s must exceed 1, got {s}")));
    }
    Ok(0.75 * (1.0 + (s - 1.0) / 3.0 + 3.0 / (4.0 * (s - 1.0))))
}

/// Largest energy-stable time step, `3 De / (2 (b − 2s) γ(s))`; infinite
/// when `s = b/2`.
pub fn stability_max_dt(cfg: &SolverConfig) -> Result<f64> {
    let gamma = gamma_threshold(cfg.s)?;
    let gap = cfg.b - 2.0 * cfg.s;
    if gap <= 1e-12 * cfg.b.abs().max(1.0) {
        return Ok(f64::INFINITY);
    }
    Ok(3.0 * cfg.de / (2.0 * gap * gamma))
}

impl SolverConfig {
    /// Checks every invariant and the time-step gate.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("b", self.b), ("s", self.s), ("De", self.de), ("dt", self.dt)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(invalid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.k.iter().flatten().any(|v| !v.is_finite()) {
            return Err(invalid("K has non-finite entries"));
        }
        let tr = self.k[0][0] + self.k[1][1] + self.k[2][2];
        if tr.abs() > 1e-14 {
            return Err(invalid(format!("K must be traceless (incompressible flow), trace = {tr:e}")));
        }
        if !(self.s > 1.0) || self.s > 0.5 * self.b + 1e-12 {
            return Err(invalid(format!(
                "weight index must satisfy 1 < s <= b/2 = {}, got s = {}",
                0.5 * self.b,
                self.s
            )));
        }
        if self.l_max % 2 == 1 {
            return Err(invalid(format!("L must be even, got {}", self.l_max)));
        }
        if self.basis == BasisKind::JgInf && self.n_max < self.l_max {
            return Err(invalid(format!(
                "JGinf requires N >= L (N = {}, L = {})",
                self.n_max, self.l_max
            )));
        }
        if !(self.t_end >= self.t0) {
            return Err(invalid(format!(
                "end time {} precedes start time {}",
                self.t_end, self.t0
            )));
        }
        let limit = stability_max_dt(self)?;
        if self.dt >= limit && !self.allow_unstable_dt {
            return Err(invalid(format!(
                "dt = {} violates the energy-stability bound dt < {limit} (set allow_unstable_dt to override)",
                self.dt
            )));
        }
        Ok(())
    }

    pub fn layout(&self) -> SpectralLayout {
        SpectralLayout::even(self.basis, self.l_max, self.n_max)
    }

    pub fn dof(&self) -> usize {
        degrees_of_freedom(self.basis, self.l_max, self.n_max)
    }

    /// Symmetric part of `K`.
    pub fn strain_rate(&self) -> [[f64; 3]; 3] {
        let mut d = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                d[i][j] = 0.5 * (self.k[i][j] + self.k[j][i]);
            }
        }
        d
    }
}

/// Coefficient vector in the canonical layout at a given time.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralState {
    pub coeffs: Vec<f64>,
    pub time: f64,
}

impl SpectralState {
    pub fn zeros(len: usize, time: f64) -> Self {
        Self {
            coeffs: vec![0.0; len],
            time,
        }
    }
}

/// Convection couplings between one trial degree and one test degree,
/// applied as a single matrix product over all trial modes of that degree.
#[derive(Debug, Clone)]
struct DegreePairGroup {
    test_degree: usize,
    trial_degree: usize,
    /// `[stretch; overlap]` stacked, `2·rows × cols`.
    stacked: DMatrix<f64>,
    trial_modes: Vec<usize>,
    /// `(test mode, column in trial_modes, stretch coefficient, overlap coefficient)`.
    targets: Vec<(usize, usize, f64, f64)>,
}

/// Time-independent discrete operator: factorized implicit blocks, mass
/// matrices and the convection applier.
#[derive(Debug, Clone)]
pub struct AssembledOperator {
    pub cfg: SolverConfig,
    pub layout: SpectralLayout,
    pub radial: RadialBlockSet,
    groups: Vec<DegreePairGroup>,
    lhs_bdf2: Vec<BandedLu>,
    lhs_euler: Vec<BandedLu>,
    mass_lu: Vec<BandedLu>,
    /// `(basis function, 1)` for each coefficient.
    pub mass_vector: Vec<f64>,
}

/// Builds the operator over even degrees `0, 2, …, L`.
pub fn assemble_operator(cfg: &SolverConfig) -> Result<AssembledOperator> {
    cfg.validate()?;
    let degrees: Vec<usize> = (0..=cfg.l_max).step_by(2).collect();
    build_operator(cfg, &degrees, true)
}

/// Builds the operator over every degree `0, 1, …, L`, odd ones included.
pub fn assemble_operator_all_degrees(cfg: &SolverConfig) -> Result<AssembledOperator> {
    let mut c = cfg.clone();
    let odd_l = c.l_max;
    c.l_max -= odd_l % 2;
    c.validate()?;
    let degrees: Vec<usize> = (0..=cfg.l_max).collect();
    let mut op = build_operator(cfg, &degrees, false)?;
    op.cfg.l_max = odd_l;
    Ok(op)
}

/// Implicit block `c·O + (1/De)(8P + 2l(l+1)Q) + ((b − 2s)/De)·4R`.
fn implicit_block(cfg: &SolverConfig, radial: &RadialBlockSet, slot: usize, c: f64) -> BandedMatrix {
    let l = radial.degrees[slot] as f64;
    let mut m = BandedMatrix::zeros(radial.mass[slot].size(), 3, 3);
    m = m.add_scaled(c, &radial.mass[slot]);
    m = m.add_scaled(8.0 / cfg.de, &radial.stiffness[slot]);
    if l > 0.0 {
        m = m.add_scaled(2.0 * l * (l + 1.0) / cfg.de, &radial.angular[slot]);
    }
    m.add_scaled(4.0 * (cfg.b - 2.0 * cfg.s) / cfg.de, &radial.spring[slot])
}

fn build_operator(cfg: &SolverConfig, degrees: &[usize], even_only: bool) -> Result<AssembledOperator> {
    let layout = SpectralLayout::with_degrees(cfg.basis, degrees, cfg.n_max);
    let radial = build_radial_blocks_for(cfg.basis, cfg.s, degrees, cfg.n_max, even_only)?;
    let mut lhs_bdf2 = Vec::with_capacity(degrees.len());
    let mut lhs_euler = Vec::with_capacity(degrees.len());
    let mut mass_lu = Vec::with_capacity(degrees.len());
    for slot in 0..degrees.len() {
        let l = degrees[slot];
        let fac = |m: BandedMatrix, what: &str| {
            m.factorize().map_err(|e| Error::Singular(format!("{what} block for l = {l}: {e}")))
        };
        lhs_bdf2.push(fac(implicit_block(cfg, &radial, slot, 1.5 / cfg.dt), "BDF2")?);
        lhs_euler.push(fac(implicit_block(cfg, &radial, slot, 1.0 / cfg.dt), "backward Euler")?);
        mass_lu.push(fac(radial.mass[slot].clone(), "mass")?);
    }

    let groups = if cfg.k.iter().flatten().all(|&v| v == 0.0) {
        Vec::new()
    } else {
        let angular = assemble_uvw_for(degrees)?;
        group_couplings(&layout, &radial, angular.convection_couplings(&cfg.k))?
    };

    // (φ_n Y_00, 1) = √(4π) ∫ φ_n (1−p)^s (1+p)^{1/2} dp
    let mut mass_vector = vec![0.0; layout.len()];
    if let Some(m0) = layout.mode_index(crate::special::HarmonicIndex { l: 0, m: 0, v: 0 }) {
        let basis = &radial.bases[layout.degree_slot(m0)];
        let rule = gauss_jacobi_rule(cfg.s, 0.5, cfg.n_max + 4)?;
        let mut vals = vec![0.0; basis.dim];
        let dst = &mut mass_vector[layout.block(m0)];
        for (&p, &w) in rule.nodes.iter().zip(&rule.weights) {
            basis.eval_all(p, &mut vals);
            for (d, v) in dst.iter_mut().zip(&vals) {
                *d += w * v * (4.0 * PI).sqrt();
            }
        }
    }

    Ok(AssembledOperator {
        cfg: cfg.clone(),
        layout,
        radial,
        groups,
        lhs_bdf2,
        lhs_euler,
        mass_lu,
        mass_vector,
    })
}

fn group_couplings(
    layout: &SpectralLayout,
    radial: &RadialBlockSet,
    couplings: Vec<ConvectionCoupling>,
) -> Result<Vec<DegreePairGroup>> {
    let mut by_pair: BTreeMap<(usize, usize), Vec<ConvectionCoupling>> = BTreeMap::new();
    for c in couplings {
        by_pair
            .entry((layout.modes[c.test].l, layout.modes[c.trial].l))
            .or_default()
            .push(c);
    }
    let mut groups = Vec::with_capacity(by_pair.len());
    for ((lt, ls), list) in by_pair {
        let block = radial.cross(lt, ls).ok_or_else(|| {
            invalid(format!("no radial cross block for test degree {lt}, trial degree {ls}"))
        })?;
        let stacked = DMatrix::from_fn(2 * block.rows, block.cols, |i, j| {
            if i < block.rows {
                block.stretch[i * block.cols + j]
            } else {
                block.overlap[(i - block.rows) * block.cols + j]
            }
        });
        let mut trial_modes: Vec<usize> = list.iter().map(|c| c.trial).collect();
        trial_modes.sort_unstable();
        trial_modes.dedup();
        let targets = list
            .iter()
            .map(|c| {
                let col = trial_modes.binary_search(&c.trial).unwrap();
                (c.test, col, c.stretch, c.overlap)
            })
            .collect();
        groups.push(DegreePairGroup {
            test_degree: lt,
            trial_degree: ls,
            stacked,
            trial_modes,
            targets,
        });
    }
    Ok(groups)
}

impl AssembledOperator {
    pub fn len(&self) -> usize {
        self.layout.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layout.is_empty()
    }

    /// True when the convection applier is the zero map.
    pub fn convection_is_zero(&self) -> bool {
        self.groups.is_empty()
    }

    /// Number of individual mode-to-mode convection couplings.
    pub fn coupling_count(&self) -> usize {
        self.groups.iter().map(|g| g.targets.len()).sum()
    }

    /// Largest `|l − l'|` reached by the convection applier.
    pub fn max_coupled_degree_gap(&self) -> usize {
        self.groups
            .iter()
            .map(|g| g.test_degree.abs_diff(g.trial_degree))
            .max()
            .unwrap_or(0)
    }

    /// `y += k_ij D_ij x`.
    pub fn apply_convection_add(&self, x: &[f64], y: &mut [f64]) {
        let lay = &self.layout;
        for g in &self.groups {
            let cols = g.stacked.ncols();
            let rows = g.stacked.nrows() / 2;
            let xs = DMatrix::from_fn(cols, g.trial_modes.len(), |j, c| x[lay.block(g.trial_modes[c]).start + j]);
            let prod = &g.stacked * xs;
            for &(test, col, cs, co) in &g.targets {
                let column = prod.column(col);
                let dst = &mut y[lay.block(test)];
                for (i, d) in dst.iter_mut().enumerate() {
                    *d += cs * column[i] + co * column[rows + i];
                }
            }
        }
    }

    /// `y += c · O x` with the block-diagonal mass matrix.
    pub fn apply_mass_add(&self, c: f64, x: &[f64], y: &mut [f64]) {
        for mi in 0..self.layout.modes.len() {
            let r = self.layout.block(mi);
            let slot = self.layout.degree_slot(mi);
            self.radial.mass[slot].matvec_add(c, &x[r.clone()], &mut y[r]);
        }
    }

    /// Weighted norm squared `‖h‖²_{s,1/2} = bᵀ O b`.
    pub fn norm_sq(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for mi in 0..self.layout.modes.len() {
            let r = self.layout.block(mi);
            acc += self.radial.mass[self.layout.degree_slot(mi)].quadratic_form(&x[r]);
        }
        acc
    }

    /// Discrete mass `(h, 1)_{s,1/2}`.
    pub fn mass(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.mass_vector).map(|(a, b)| a * b).sum()
    }

    fn solve_blocks(&self, lus: &[BandedLu], rhs: &mut [f64]) {
        for mi in 0..self.layout.modes.len() {
            let r = self.layout.block(mi);
            lus[self.layout.degree_slot(mi)].solve_in_place(&mut rhs[r]);
        }
    }

    /// Solves `O c = rhs` mode by mode.
    pub fn solve_mass(&self, rhs: &mut [f64]) {
        self.solve_blocks(&self.mass_lu, rhs);
    }

    /// Galerkin projection onto the discrete space in the `(·,·)_{s,1/2}` product.
    pub fn project(&self, grid: &SphericalGrid, f: impl Fn(f64, f64, f64) -> f64) -> Vec<f64> {
        let mut rhs = grid.analyze(&grid.sample(f));
        self.solve_mass(&mut rhs);
        rhs
    }

    /// Projection grid with `extra` points beyond the expansion degree and
    /// the solver's own weight.
    pub fn projection_grid(&self, extra: usize) -> Result<SphericalGrid> {
        let l_max = self.layout.degrees.iter().copied().max().unwrap_or(0);
        SphericalGrid::new(
            &self.layout,
            self.cfg.s,
            GridSpec::for_resolution(l_max, self.cfg.n_max, extra, self.cfg.s, 0.5),
        )
    }

    /// Mass vector of a time-separable source density `h_src(p, θ, φ)`.
    pub fn source_vector(&self, grid: &SphericalGrid, h_src: impl Fn(f64, f64, f64) -> f64) -> Vec<f64> {
        grid.analyze(&grid.sample(h_src))
    }
}

/// Source `amplitude(t) · (h_src, g)` with a precomputed mass vector.
pub struct SeparableSource {
    pub vector: Vec<f64>,
    pub amplitude: Box<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for SeparableSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SeparableSource")
            .field("len", &self.vector.len())
            .finish()
    }
}

fn check_finite(x: &[f64], step: usize) -> Result<()> {
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::Unstable {
            step,
            reason: format!("non-finite coefficient at index {i}"),
        });
    }
    Ok(())
}

/// One BDF2 step from `hⁿ` (`cur`) and `hⁿ⁻¹` (`prev`).
pub fn bdf2_step(
    op: &AssembledOperator,
    cur: &SpectralState,
    prev: &SpectralState,
    source: Option<&SeparableSource>,
) -> Result<SpectralState> {
    let n = op.len();
    if cur.coeffs.len() != n || prev.coeffs.len() != n {
        return Err(invalid("state length does not match the operator layout"));
    }
    let dt = op.cfg.dt;
    let t_next = cur.time + dt;
    let ext: Vec<f64> = cur.coeffs.iter().zip(&prev.coeffs).map(|(a, b)| 2.0 * a - b).collect();
    let hist: Vec<f64> = cur.coeffs.iter().zip(&prev.coeffs).map(|(a, b)| 4.0 * a - b).collect();
    let mut rhs = vec![0.0; n];
    op.apply_convection_add(&ext, &mut rhs);
    op.apply_mass_add(0.5 / dt, &hist, &mut rhs);
    if let Some(src) = source {
        let g = (src.amplitude)(t_next);
        for (r, v) in rhs.iter_mut().zip(&src.vector) {
            *r += g * v;
        }
    }
    op.solve_blocks(&op.lhs_bdf2, &mut rhs);
    check_finite(&rhs, 0)?;
    Ok(SpectralState {
        coeffs: rhs,
        time: t_next,
    })
}

/// First-order backward-Euler step with explicit convection, giving `h¹`.
pub fn bootstrap_first_step(
    op: &AssembledOperator,
    state0: &SpectralState,
    source: Option<&SeparableSource>,
) -> Result<SpectralState> {
    let n = op.len();
    if state0.coeffs.len() != n {
        return Err(invalid("state length does not match the operator layout"));
    }
    let dt = op.cfg.dt;
    let t_next = state0.time + dt;
    let mut rhs = vec![0.0; n];
    op.apply_convection_add(&state0.coeffs, &mut rhs);
    op.apply_mass_add(1.0 / dt, &state0.coeffs, &mut rhs);
    if let Some(src) = source {
        let g = (src.amplitude)(t_next);
        for (r, v) in rhs.iter_mut().zip(&src.vector) {
            *r += g * v;
        }
    }
    op.solve_blocks(&op.lhs_euler, &mut rhs);
    check_finite(&rhs, 0)?;
    Ok(SpectralState {
        coeffs: rhs,
        time: t_next,
    })
}

/// One row of the run diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub step: usize,
    pub t: f64,
    pub mass: f64,
    /// `‖hⁿ⁺¹‖² + ‖2hⁿ⁺¹ − hⁿ‖²` in the weighted norm.
    pub energy: f64,
    /// `C11, C22, C33, C12, C13, C23` when tracked.
    pub conformation: Option<[f64; 6]>,
}

/// Controls for [`run_simulation`].
#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Record every `record_every` steps (0 disables recording).
    pub record_every: usize,
    pub track_conformation: bool,
    pub budget: Option<Duration>,
    /// Abort when energy exceeds this multiple of its first recorded value.
    pub divergence_factor: f64,
    /// Stop once the relative change per unit time falls below this value.
    pub steady_tolerance: Option<f64>,
    /// Number of steps between steady-state checks.
    pub steady_window: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            record_every: 1,
            track_conformation: false,
            budget: None,
            divergence_factor: 1e6,
            steady_tolerance: None,
            steady_window: 100,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub state: SpectralState,
    pub previous: SpectralState,
    pub diagnostics: Vec<Diagnostic>,
    pub steps: usize,
    pub reached_steady_state: bool,
    /// Wall-clock time of the time loop.
    pub elapsed: Duration,
}

/// Marches from `initial` to `cfg.t_end`. Without `previous`, the first step
/// is a backward-Euler bootstrap; with it, `initial` and `previous` are the
/// two starting levels.
pub fn run_simulation(
    op: &AssembledOperator,
    initial: &SpectralState,
    previous: Option<&SpectralState>,
    source: Option<&SeparableSource>,
    opts: &RunOptions,
) -> Result<SimulationOutput> {
    let dt = op.cfg.dt;
    let start = Instant::now();
    let moments = if opts.track_conformation {
        Some(MomentEvaluator::new(op)?)
    } else {
        None
    };
    let mut diagnostics = Vec::new();
    let record = |step: usize, cur: &SpectralState, prev: &SpectralState, out: &mut Vec<Diagnostic>| {
        let two: Vec<f64> = cur.coeffs.iter().zip(&prev.coeffs).map(|(a, b)| 2.0 * a - b).collect();
        let energy = op.norm_sq(&cur.coeffs) + op.norm_sq(&two);
        let conformation = moments.as_ref().and_then(|m| {
            m.conformation(&cur.coeffs).ok().map(|c| {
                let c = c.entries;
                [c[0][0], c[1][1], c[2][2], c[0][1], c[0][2], c[1][2]]
            })
        });
        out.push(Diagnostic {
            step,
            t: cur.time,
            mass: op.mass(&cur.coeffs),
            energy,
            conformation,
        });
        energy
    };

    let (mut prev, mut cur, mut step) = match previous {
        Some(p) => (p.clone(), initial.clone(), 1usize),
        None => {
            let first = bootstrap_first_step(op, initial, source)
                .map_err(|e| with_step(e, 1))?;
            (initial.clone(), first, 1usize)
        }
    };
    let e_ref = {
        let two: Vec<f64> = cur.coeffs.iter().zip(&prev.coeffs).map(|(a, b)| 2.0 * a - b).collect();
        (op.norm_sq(&cur.coeffs) + op.norm_sq(&two)).max(f64::MIN_POSITIVE)
    };
    if opts.record_every > 0 {
        record(step, &cur, &prev, &mut diagnostics);
    }
    let mut window_start = cur.coeffs.clone();
    let mut window_time = cur.time;
    let mut steady = false;
    while cur.time < op.cfg.t_end - 0.5 * dt {
        let next = bdf2_step(op, &cur, &prev, source).map_err(|e| with_step(e, step + 1))?;
        step += 1;
        prev = cur;
        cur = next;
        let recording = opts.record_every > 0 && step % opts.record_every == 0;
        let two: Vec<f64> = cur.coeffs.iter().zip(&prev.coeffs).map(|(a, b)| 2.0 * a - b).collect();
        let energy = op.norm_sq(&cur.coeffs) + op.norm_sq(&two);
        if recording {
            record(step, &cur, &prev, &mut diagnostics);
        }
        if !energy.is_finite() || energy > opts.divergence_factor * e_ref {
            return Err(Error::Unstable {
                step,
                reason: format!("discrete energy grew from {e_ref:e} to {energy:e}"),
            });
        }
        if let Some(budget) = opts.budget {
            if start.elapsed() > budget {
                return Err(Error::Budget(format!(
                    "stopped at step {step} (t = {}) after {:?}",
                    cur.time,
                    start.elapsed()
                )));
            }
        }
        if let Some(tol) = opts.steady_tolerance {
            if step % opts.steady_window.max(1) == 0 {
                let norm = op.norm_sq(&cur.coeffs).sqrt().max(f64::MIN_POSITIVE);
                let diff: Vec<f64> = cur.coeffs.iter().zip(&window_start).map(|(a, b)| a - b).collect();
                let rate = op.norm_sq(&diff).sqrt() / norm / (cur.time - window_time);
                if rate < tol {
                    steady = true;
                    break;
                }
                window_start.clone_from(&cur.coeffs);
                window_time = cur.time;
            }
        }
    }
    if opts.record_every > 0 && diagnostics.last().map(|d| d.step) != Some(step) {
        record(step, &cur, &prev, &mut diagnostics);
    }
    Ok(SimulationOutput {
        state: cur,
        previous: prev,
        diagnostics,
        steps: step,
        reached_steady_state: steady,
        elapsed: start.elapsed(),
    })
}

fn with_step(e: Error, step: usize) -> Error {
    match e {
        Error::Unstable { reason, .. } => Error::Unstable { step, reason },
        other => other,
    }
}

/// Writes diagnostics as CSV (`step,t,mass,energy[,C11,…]`).
pub fn write_diagnostics_csv(path: &Path, rows: &[Diagnostic]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    let with_c = rows.iter().any(|r| r.conformation.is_some());
    write!(f, "step,t,mass,energy")?;
    if with_c {
        write!(f, ",C11,C22,C33,C12,C13,C23")?;
    }
    writeln!(f)?;
    for r in rows {
        write!(f, "{},{:.17e},{:.17e},{:.17e}", r.step, r.t, r.mass, r.energy)?;
        if with_c {
            match r.conformation {
                Some(c) => {
                    for v in c {
                        write!(f, ",{v:.17e}")?;
                    }
                }
                None => write!(f, ",,,,,,")?,
            }
        }
        writeln!(f)?;
    }
    f.flush()?;
    Ok(())
}
