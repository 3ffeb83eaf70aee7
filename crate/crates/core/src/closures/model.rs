//! Closed conformation-tensor evolution, stress and closure densities.

use super::nn::MlpWeights;
use super::pla::PlaTable;
use super::qe::{check_admissible, QeIntegrator};
use crate::error::{invalid, Error, Result};
use crate::field::to_cartesian;
use crate::tensor::{
    add_scaled, asymmetry, matmul, max_abs, scale, symmetric_eigen, symmetrize, trace, transpose, Mat3, IDENTITY,
};
use crate::transform::SphericalGrid;
use serde::{Deserialize, Serialize};

/// Relaxation coefficient of the Peterlin model: `b` as printed or the `2b`
/// that follows from substituting the Peterlin average into the exact second
/// moment equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FenePVariant {
    #[default]
    Printed,
    Consistent,
}

impl FenePVariant {
    pub fn coefficient(self, b: f64) -> f64 {
        match self {
            FenePVariant::Printed => b,
            FenePVariant::Consistent => 2.0 * b,
        }
    }

    /// Isotropic fixed point `c` of `C = c I` under `K = 0`.
    pub fn equilibrium_moment(self, b: f64) -> f64 {
        match self {
            FenePVariant::Printed => 2.0 / (b + 6.0),
            FenePVariant::Consistent => 1.0 / (b + 3.0),
        }
    }
}

/// Closure model with the resources it needs.
#[derive(Debug, Clone, Copy)]
pub enum ClosureModel<'a> {
    FeneP(FenePVariant),
    /// Quasi-equilibrium with the multiplier map from a lookup table.
    QePla(&'a PlaTable),
    /// Quasi-equilibrium with the multiplier map from the network.
    QeNn(&'a MlpWeights),
    /// Quasi-equilibrium with the exact Newton inverse.
    QeExact(&'a QeIntegrator),
}

impl ClosureModel<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            ClosureModel::FeneP(FenePVariant::Printed) => "fene-p",
            ClosureModel::FeneP(FenePVariant::Consistent) => "fene-p-consistent",
            ClosureModel::QePla(_) => "qe-pla",
            ClosureModel::QeNn(_) => "qe-nn",
            ClosureModel::QeExact(_) => "qe-exact",
        }
    }

    pub fn is_quasi_equilibrium(&self) -> bool {
        !matches!(self, ClosureModel::FeneP(_))
    }

    /// Sorted multipliers for sorted eigenvalues.
    fn sorted_multipliers(&self, c: [f64; 3]) -> Result<[f64; 3]> {
        match self {
            ClosureModel::FeneP(_) => Err(invalid("the Peterlin model has no multipliers")),
            ClosureModel::QePla(t) => t.lookup(c),
            ClosureModel::QeNn(w) => Ok(w.infer(c)),
            ClosureModel::QeExact(qi) => Ok(qi.invert(c)?.lambda),
        }
    }

    /// Multiplier tensor coaxial with `C`: diagonalize, map the sorted
    /// eigenvalues, rotate back.
    pub fn multipliers(&self, c: &Mat3) -> Result<Mat3> {
        let eig = symmetric_eigen(c)?;
        check_admissible(eig.values)?;
        let lam = self.sorted_multipliers(eig.values)?;
        Ok(eig.reconstruct(lam))
    }
}

fn check_conformation(c: &Mat3) -> Result<f64> {
    let tr = trace(c);
    if !(tr < 1.0) {
        return Err(Error::Inadmissible(format!("trace {tr} must stay below 1")));
    }
    if asymmetry(c) > 1e-10 * max_abs(c).max(1.0) {
        return Err(invalid("conformation tensor is not symmetric"));
    }
    Ok(tr)
}

/// `dC/dt` of the closed second-moment equation.
pub fn closure_rhs(model: &ClosureModel, c: &Mat3, k: &Mat3, de: f64, b: f64) -> Result<Mat3> {
    let tr = check_conformation(c)?;
    let kc = matmul(k, c);
    let flow = add_scaled(&kc, 1.0, &transpose(&kc));
    let rhs = match model {
        ClosureModel::FeneP(variant) => {
            let spring = add_scaled(&scale(2.0 / de, &IDENTITY), -variant.coefficient(b) / (de * (1.0 - tr)), c);
            add_scaled(&flow, 1.0, &spring)
        }
        _ => {
            let lam = model.multipliers(c)?;
            add_scaled(&flow, -4.0 / de, &matmul(c, &lam))
        }
    };
    Ok(symmetrize(&rhs))
}

/// Polymer stress: `2Cλ` for quasi-equilibrium models, `bC/(1−tr C) − I`
/// for the Peterlin model.
pub fn polymer_stress(model: &ClosureModel, c: &Mat3, b: f64) -> Result<crate::tensor::StressTensor> {
    let tr = check_conformation(c)?;
    let tau = match model {
        ClosureModel::FeneP(_) => add_scaled(&scale(b / (1.0 - tr), c), -1.0, &IDENTITY),
        _ => scale(2.0, &matmul(c, &model.multipliers(c)?)),
    };
    Ok(crate::tensor::StressTensor::new(symmetrize(&tau)))
}

/// Integration controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosureRunOptions {
    pub dt: f64,
    pub t_end: f64,
    /// Stop once `max |dC/dt|` drops below this.
    pub steady_tolerance: f64,
    /// Keep every n-th state; 0 keeps only the endpoints.
    pub record_every: usize,
}

impl ClosureRunOptions {
    /// `dt = 10⁻³ De`.
    pub fn for_deborah(de: f64, t_end: f64) -> Self {
        Self {
            dt: 1e-3 * de,
            t_end,
            steady_tolerance: 1e-10,
            record_every: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosureTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<Mat3>,
    pub steps: usize,
    pub reached_steady_state: bool,
    /// `max |dC/dt|` at the final state.
    pub final_rate: f64,
}

impl ClosureTrajectory {
    pub fn last(&self) -> &Mat3 {
        self.states.last().expect("trajectory holds at least the initial state")
    }
}

/// Classical RK4 with fixed step, symmetrization and an admissibility check
/// after every step, stopping early at steady state.
pub fn integrate_closure(
    model: &ClosureModel,
    c0: &Mat3,
    k: &Mat3,
    de: f64,
    b: f64,
    opts: &ClosureRunOptions,
) -> Result<ClosureTrajectory> {
    if !(opts.dt > 0.0 && opts.t_end >= 0.0 && de > 0.0) {
        return Err(invalid("integration needs dt > 0, t_end ≥ 0 and De > 0"));
    }
    check_step(c0, 0)?;
    let rhs = |c: &Mat3| closure_rhs(model, c, k, de, b);
    let n_steps = (opts.t_end / opts.dt).ceil() as usize;
    let mut c = *c0;
    let mut times = vec![0.0];
    let mut states = vec![c];
    let mut rate = max_abs(&rhs(&c)?);
    let mut steps = 0;
    let mut steady = rate < opts.steady_tolerance;
    while steps < n_steps && !steady {
        let h = opts.dt;
        let stage = |c: &Mat3, d: &Mat3, f: f64| rhs(&add_scaled(c, f * h, d)).map_err(|e| at_step(e, steps + 1));
        let k1 = rhs(&c).map_err(|e| at_step(e, steps + 1))?;
        let k2 = stage(&c, &k1, 0.5)?;
        let k3 = stage(&c, &k2, 0.5)?;
        let k4 = stage(&c, &k3, 1.0)?;
        let mut next = c;
        for i in 0..3 {
            for j in 0..3 {
                next[i][j] += h / 6.0 * (k1[i][j] + 2.0 * k2[i][j] + 2.0 * k3[i][j] + k4[i][j]);
            }
        }
        c = symmetrize(&next);
        steps += 1;
        check_step(&c, steps)?;
        rate = max_abs(&rhs(&c).map_err(|e| at_step(e, steps))?);
        steady = rate < opts.steady_tolerance;
        if opts.record_every > 0 && steps % opts.record_every == 0 || steps == n_steps || steady {
            times.push(steps as f64 * h);
            states.push(c);
        }
    }
    Ok(ClosureTrajectory {
        times,
        states,
        steps,
        reached_steady_state: steady,
        final_rate: rate,
    })
}

fn at_step(e: Error, step: usize) -> Error {
    match e {
        Error::Inadmissible(msg) => Error::Inadmissible(format!("step {step}: {msg}")),
        other => other,
    }
}

fn check_step(c: &Mat3, step: usize) -> Result<()> {
    let eig = symmetric_eigen(c)?;
    let tr = trace(c);
    if eig.values[2] <= 0.0 || tr >= 1.0 || !tr.is_finite() {
        return Err(Error::Inadmissible(format!(
            "step {step}: eigenvalues {:?}, trace {tr}",
            eig.values
        )));
    }
    Ok(())
}

/// Unnormalized log-density of the closure's own distribution: the
/// quasi-equilibrium form `(b/2) ln(1−|q|²) + q·λq`, or for the Peterlin
/// model the Gaussian `−½ q·C⁻¹q` restricted to the ball.
pub fn closure_log_density(model: &ClosureModel, c: &Mat3, b: f64) -> Result<impl Fn([f64; 3]) -> f64> {
    check_conformation(c)?;
    let (quad, radial) = match model {
        ClosureModel::FeneP(_) => {
            let eig = symmetric_eigen(c)?;
            if eig.values[2] <= 0.0 {
                return Err(Error::Inadmissible(format!("eigenvalues {:?}", eig.values)));
            }
            (eig.reconstruct(eig.values.map(|v| -0.5 / v)), 0.0)
        }
        _ => (model.multipliers(c)?, 0.5 * b),
    };
    Ok(move |q: [f64; 3]| {
        let r2 = q[0] * q[0] + q[1] * q[1] + q[2] * q[2];
        if r2 >= 1.0 {
            return f64::NEG_INFINITY;
        }
        let mut e = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                e += q[i] * quad[i][j] * q[j];
            }
        }
        e + if radial != 0.0 { radial * (1.0 - r2).ln() } else { 0.0 }
    })
}

/// Samples `exp(log_f)` on a ball grid with weight `(1+p)^{1/2}` and scales
/// it to unit mass.
pub fn normalized_density_on_grid(grid: &SphericalGrid, log_f: impl Fn([f64; 3]) -> f64) -> Result<Vec<f64>> {
    if (grid.spec.alpha, grid.spec.beta) != (0.0, 0.5) {
        return Err(invalid("densities are sampled on a grid with weight (1+p)^(1/2)"));
    }
    let logs = grid.sample(|p, theta, phi| log_f(to_cartesian((0.5 * (1.0 + p)).max(0.0).sqrt(), theta, phi)));
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(invalid("density is not finite on the grid"));
    }
    let vals: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    normalize_on_grid(grid, vals)
}

/// Scales grid values of a ball density to unit mass.
pub fn normalize_on_grid(grid: &SphericalGrid, mut vals: Vec<f64>) -> Result<Vec<f64>> {
    let ones = vec![1.0; vals.len()];
    // r² dr = (1+p)^{1/2} dp / (4√2)
    let mass = grid.inner(&vals, &ones) / (4.0 * std::f64::consts::SQRT_2);
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(invalid(format!("density mass {mass} is not positive")));
    }
    vals.iter_mut().for_each(|v| *v /= mass);
    Ok(vals)
}
