//! Closure-versus-kinetic comparisons in homogeneous flows: spectral
//! reference steady states, closure steady states, density and stress errors,
//! and density slices.

use crate::closures::{
    closure_log_density, integrate_closure, normalized_density_on_grid, polymer_stress, ClosureModel,
    ClosureRunOptions, FenePVariant,
};
use crate::closures::model::normalize_on_grid;
use crate::error::{invalid, Result};
use crate::field::{density_on_grid, relative_l2, sample_slice, FieldEvaluator, FieldSlice, MomentEvaluator, SliceSpec};
use crate::layout::SpectralLayout;
use crate::radial::BasisKind;
use crate::solver::{assemble_operator, run_simulation, AssembledOperator, RunOptions, SolverConfig, SpectralState};
use crate::tensor::{diag, Mat3, StressTensor};
use crate::transform::{GridSpec, SphericalGrid};
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowKind {
    /// `K = diag(κ, −κ, 0)`.
    Extensional,
    /// `K = [[1, κ, 0], [0, −1, 0], [0, 0, 0]]`.
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Flow {
    pub kind: FlowKind,
    pub kappa: f64,
    pub de: f64,
}

impl Flow {
    pub fn extensional(kappa: f64, de: f64) -> Self {
        Self {
            kind: FlowKind::Extensional,
            kappa,
            de,
        }
    }

    pub fn mixed(kappa: f64, de: f64) -> Self {
        Self {
            kind: FlowKind::Mixed,
            kappa,
            de,
        }
    }

    pub fn velocity_gradient(&self) -> Mat3 {
        let k = self.kappa;
        match self.kind {
            FlowKind::Extensional => diag([k, -k, 0.0]),
            FlowKind::Mixed => [[1.0, k, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 0.0]],
        }
    }
}

/// Resolution and stopping rules of the spectral reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSettings {
    pub b: f64,
    pub s: f64,
    pub n: usize,
    pub basis: BasisKind,
    pub dt: f64,
    /// Final time in units of `De` if steady state is not detected first.
    pub t_max_per_de: f64,
    pub steady_tolerance: f64,
    /// Extra quadrature points of the comparison grid beyond `n`.
    pub grid_extra: usize,
}

impl Default for ReferenceSettings {
    fn default() -> Self {
        Self {
            b: 12.0,
            s: 6.0,
            n: 40,
            basis: BasisKind::Jg1,
            dt: 1e-3,
            t_max_per_de: 50.0,
            steady_tolerance: 1e-10,
            grid_extra: 24,
        }
    }
}

impl ReferenceSettings {
    pub fn config(&self, flow: &Flow) -> SolverConfig {
        SolverConfig {
            b: self.b,
            s: self.s,
            de: flow.de,
            k: flow.velocity_gradient(),
            l_max: self.n,
            n_max: self.n,
            dt: self.dt,
            basis: self.basis,
            t0: 0.0,
            t_end: self.t_max_per_de * flow.de.max(1.0),
            allow_unstable_dt: false,
        }
    }

    /// Unweighted ball grid shared by every density in a comparison.
    pub fn comparison_grid_spec(&self) -> GridSpec {
        GridSpec::for_resolution(self.n, self.n, self.grid_extra, 0.0, 0.5)
    }
}

/// Steady spectral solution with its moments and sampled density.
#[derive(Debug)]
pub struct ReferenceSolution {
    pub flow: Flow,
    pub settings: ReferenceSettings,
    pub operator: AssembledOperator,
    /// Unit-mass coefficients.
    pub coeffs: Vec<f64>,
    pub conformation: Mat3,
    pub stress: StressTensor,
    pub grid: SphericalGrid,
    /// Unit-mass density on `grid`.
    pub density: Vec<f64>,
    pub steps: usize,
    pub reached_steady_state: bool,
    /// Time marching only, assembly excluded.
    pub seconds: f64,
}

impl ReferenceSolution {
    /// Density at a Cartesian point (unit mass).
    pub fn density_at(&self, eval: &FieldEvaluator, q: [f64; 3]) -> Result<f64> {
        eval.f_cartesian(&self.coeffs, q)
    }

    pub fn evaluator(&self) -> Result<FieldEvaluator> {
        FieldEvaluator::for_operator(&self.operator)
    }
}

/// Marches from the equilibrium distribution to steady state.
pub fn solve_reference(flow: &Flow, settings: &ReferenceSettings) -> Result<ReferenceSolution> {
    solve_reference_with_resolution(flow, settings, settings.n)
}

/// As [`solve_reference`] at expansion degree `n`, keeping the comparison
/// grid of `settings`.
pub fn solve_reference_with_resolution(flow: &Flow, settings: &ReferenceSettings, n: usize) -> Result<ReferenceSolution> {
    let mut cfg = settings.config(flow);
    cfg.l_max = n;
    cfg.n_max = n;
    let op = assemble_operator(&cfg)?;
    let proj = op.projection_grid(8)?;
    // equilibrium: h = (1−r²)^{b/2−s}
    let expo = 0.5 * settings.b - settings.s;
    let init = SpectralState {
        coeffs: op.project(&proj, |p, _, _| (0.5 * (1.0 - p)).powf(expo)),
        time: 0.0,
    };
    let opts = RunOptions {
        record_every: 0,
        steady_tolerance: Some(settings.steady_tolerance),
        steady_window: 200,
        ..RunOptions::default()
    };
    let start = Instant::now();
    let out = run_simulation(&op, &init, None, None, &opts)?;
    let seconds = start.elapsed().as_secs_f64();
    let moments = MomentEvaluator::new(&op)?;
    let coeffs = moments.normalized(&out.state.coeffs)?;
    let conformation = moments.conformation(&coeffs)?.entries;
    let stress = moments.stress(&coeffs, settings.b)?;
    let grid = SphericalGrid::new(&op.layout, settings.s, settings.comparison_grid_spec())?;
    let density = normalize_on_grid(&grid, density_on_grid(&grid, settings.s, &coeffs))?;
    Ok(ReferenceSolution {
        flow: *flow,
        settings: *settings,
        operator: op,
        coeffs,
        conformation,
        stress,
        grid,
        density,
        steps: out.steps,
        reached_steady_state: out.reached_steady_state,
        seconds,
    })
}

/// Relative unweighted L² distance between two spectral solutions on the
/// comparison grid of `reference`.
pub fn spectral_density_error(coarse: &ReferenceSolution, reference: &ReferenceSolution) -> Result<f64> {
    let layout: &SpectralLayout = &coarse.operator.layout;
    let grid = SphericalGrid::new(layout, coarse.settings.s, reference.grid.spec)?;
    let vals = normalize_on_grid(&grid, density_on_grid(&grid, coarse.settings.s, &coarse.coeffs))?;
    relative_l2(&reference.grid, &vals, &reference.density)
}

/// Starting conformation: the model's own isotropic equilibrium.
pub fn closure_equilibrium(model: &ClosureModel, b: f64) -> Mat3 {
    let c = match model {
        ClosureModel::FeneP(v) => v.equilibrium_moment(b),
        _ => crate::closures::equilibrium_moment(b),
    };
    diag([c; 3])
}

/// One closure evaluated against a reference.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosureComparison {
    pub model: String,
    pub conformation: Mat3,
    pub stress: StressTensor,
    /// Relative unweighted L² density error.
    pub l2_error: f64,
    /// `|τ₁₂ − τ₁₂_ref|`.
    pub tau12_error: f64,
    /// `|N₁ − N₁_ref|`.
    pub n1_error: f64,
    pub steps: usize,
    pub reached_steady_state: bool,
    /// Time integration only.
    pub seconds: f64,
}

/// Integrates the closure from its equilibrium to steady state under the
/// reference flow and compares density and stress.
pub fn compare_closure(model: &ClosureModel, reference: &ReferenceSolution) -> Result<ClosureComparison> {
    let b = reference.settings.b;
    let de = reference.flow.de;
    let k = reference.flow.velocity_gradient();
    let opts = ClosureRunOptions::for_deborah(de, reference.settings.t_max_per_de * de.max(1.0));
    let start = Instant::now();
    let traj = integrate_closure(model, &closure_equilibrium(model, b), &k, de, b, &opts)?;
    let seconds = start.elapsed().as_secs_f64();
    let c = *traj.last();
    let stress = polymer_stress(model, &c, b)?;
    let density = normalized_density_on_grid(&reference.grid, closure_log_density(model, &c, b)?)?;
    let l2_error = relative_l2(&reference.grid, &density, &reference.density)?;
    Ok(ClosureComparison {
        model: model.name().to_string(),
        conformation: c,
        stress,
        l2_error,
        tau12_error: (stress.shear() - reference.stress.shear()).abs(),
        n1_error: (stress.n1() - reference.stress.n1()).abs(),
        steps: traj.steps,
        reached_steady_state: traj.reached_steady_state,
        seconds,
    })
}

/// Unit-mass closure density sampled on a slice.
pub fn closure_slice(model: &ClosureModel, c: &Mat3, b: f64, grid: &SphericalGrid, spec: SliceSpec) -> Result<FieldSlice> {
    let log_f = closure_log_density(model, c, b)?;
    // mass from the comparison grid
    let unit = normalized_density_on_grid(grid, &log_f)?;
    let raw = grid.sample(|p, t, f| {
        log_f(crate::field::to_cartesian((0.5 * (1.0 + p)).max(0.0).sqrt(), t, f))
    });
    let top = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let i = raw.iter().position(|&v| v == top).ok_or_else(|| invalid("empty grid"))?;
    let scale = unit[i] / (raw[i] - top).exp();
    sample_slice(spec, |q| Ok(scale * (log_f(q) - top).exp()))
}

/// Unit-mass reference density sampled on a slice.
pub fn reference_slice(reference: &ReferenceSolution, spec: SliceSpec) -> Result<FieldSlice> {
    let eval = reference.evaluator()?;
    sample_slice(spec, |q| reference.density_at(&eval, q))
}

/// Both Peterlin variants, for reporting.
pub const FENE_P_VARIANTS: [FenePVariant; 2] = [FenePVariant::Printed, FenePVariant::Consistent];
