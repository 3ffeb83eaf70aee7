//! Acceptance suite: one PASS/FAIL line per primary criterion, at the
//! stated tolerances. Runs as a plain binary (`harness = false`) and exits
//! nonzero when any criterion fails.
//!
//! `cargo test --release -p fene-core --test acceptance`

mod common;

use common::{config, equilibrium_state, mixed, perturbed_state, radial_out_of_band, random_admissible, uvw_max_deviation};
use fene_core::benchmark::{
    closure_slice, compare_closure, reference_slice, solve_reference, Flow, ReferenceSettings, ReferenceSolution,
};
use fene_core::closures::{
    nn_infer, nn_load, pla_build_table, pla_lookup, ClosureModel, FenePVariant, MlpWeights, PlaGridSpec, PlaTable,
    QeIntegrator,
};
use fene_core::field::{count_local_maxima, SliceSpec};
use fene_core::layout::degrees_of_freedom;
use fene_core::mms::{run_mms, MmsProblem};
use fene_core::radial::BasisKind;
use fene_core::solver::{
    assemble_operator, gamma_threshold, run_simulation, stability_max_dt, RunOptions, SpectralState,
};
use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, RngSeed, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::path::Path;
use std::time::Instant;

type Outcome = Result<(bool, String), Box<dyn std::error::Error>>;

const B: f64 = 12.0;
const KAPPAS: [f64; 5] = [1.0, 2.0, 5.0, 10.0, 20.0];
const PEAK_TOL: f64 = 1e-3;

fn within_factor(got: f64, want: f64, factor: f64) -> bool {
    got.is_finite() && got <= want * factor && got >= want / factor
}

/// Closure resources shared by the benchmark criteria.
struct Closures {
    integrator: QeIntegrator,
    table: PlaTable,
    network: MlpWeights,
}

impl Closures {
    fn new() -> Result<Self, Box<dyn std::error::Error>> {
        let integrator = QeIntegrator::new(B)?;
        let start = Instant::now();
        let table = pla_build_table(&integrator, PlaGridSpec::default())?;
        println!("  (lookup table {:?} built in {:.1} s)", table.grid.shape, start.elapsed().as_secs_f64());
        let network = nn_load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/mlp_b12.json"))?;
        Ok(Self {
            integrator,
            table,
            network,
        })
    }
}

/// Spectral references, solved once per flow.
#[derive(Default)]
struct References {
    settings: ReferenceSettings,
    solved: HashMap<String, ReferenceSolution>,
}

impl References {
    fn get(&mut self, flow: Flow) -> Result<&ReferenceSolution, Box<dyn std::error::Error>> {
        let key = format!("{:?} κ={} De={}", flow.kind, flow.kappa, flow.de);
        if !self.solved.contains_key(&key) {
            let r = solve_reference(&flow, &self.settings)?;
            println!(
                "  (reference {key}: {} steps, steady {}, {:.1} s)",
                r.steps, r.reached_steady_state, r.seconds
            );
            self.solved.insert(key.clone(), r);
        }
        Ok(&self.solved[&key])
    }
}

fn dof_counts() -> Outcome {
    let table = [
        (BasisKind::Jg1, [(10, 726), (20, 4_851), (30, 14_383), (40, 33_281)]),
        (BasisKind::JgInf, [(10, 256), (20, 1_661), (30, 5_216), (40, 11_921)]),
    ];
    let mut ok = true;
    let mut notes = Vec::new();
    for (kind, rows) in table {
        for (n, want) in rows {
            let got = degrees_of_freedom(kind, n, n);
            if got != want {
                ok = false;
                notes.push(format!("{kind} N={n}: {got} vs tabulated {want}"));
            }
        }
    }
    if notes.is_empty() {
        notes.push("all 8 counts equal".into());
    }
    Ok((ok, notes.join("; ")))
}

fn mms_convergence() -> Outcome {
    let targets = [
        (BasisKind::Jg1, [8.76e-2, 1.10e-3, 3.40e-6, 3.41e-9]),
        (BasisKind::JgInf, [9.26e-2, 1.37e-3, 5.11e-6, 6.30e-9]),
    ];
    let mut ok = true;
    let mut notes = Vec::new();
    for (kind, want) in targets {
        let mut errs = Vec::new();
        for (i, n) in [10, 20, 30, 40].into_iter().enumerate() {
            let problem = MmsProblem {
                dt: if n == 40 { 2.5e-5 } else { 1e-4 },
                ..MmsProblem::default()
            };
            let r = run_mms(&problem, kind, n, None)?;
            println!("  (mms {kind} N={n}: error {:.3e}, {:.1} s)", r.error, r.solve_seconds);
            ok &= within_factor(r.error, want[i], 10.0);
            errs.push(r.error);
        }
        ok &= errs.windows(2).all(|w| w[1] < w[0]);
        notes.push(format!("{kind} {}", errs.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>().join("/")));
    }
    Ok((ok, notes.join("; ")))
}

fn mass_and_stationarity() -> Outcome {
    let mut worst_mass = 0.0_f64;
    let mut worst_drift = 0.0_f64;
    for basis in [BasisKind::Jg1, BasisKind::JgInf] {
        let mut cfg = config(basis, 10, 6.0, mixed(2.0));
        cfg.t_end = 0.3;
        let op = assemble_operator(&cfg)?;
        let init = perturbed_state(&op);
        let m0 = op.mass(&init.coeffs);
        let out = run_simulation(&op, &init, None, None, &RunOptions::default())?;
        let masses: Vec<f64> = std::iter::once(m0).chain(out.diagnostics.iter().map(|d| d.mass)).collect();
        for w in masses.windows(3) {
            worst_mass = worst_mass.max((3.0 * w[2] - 4.0 * w[1] + w[0]).abs() / m0.abs());
        }

        let mut cfg = config(basis, 10, 6.0, [[0.0; 3]; 3]);
        cfg.t_end = 1000.0 * cfg.dt;
        let op = assemble_operator(&cfg)?;
        let init = equilibrium_state(&op);
        let opts = RunOptions {
            record_every: 0,
            ..RunOptions::default()
        };
        let out = run_simulation(&op, &init, None, None, &opts)?;
        if out.steps != 1000 {
            return Ok((false, format!("{basis}: {} steps instead of 1000", out.steps)));
        }
        let scale = init.coeffs.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let drift = out.state.coeffs.iter().zip(&init.coeffs).fold(0.0_f64, |a, (x, y)| a.max((x - y).abs()));
        worst_drift = worst_drift.max(drift / scale);
    }
    Ok((
        worst_mass <= 1e-12 && worst_drift <= 1e-11,
        format!("BDF2 mass combination {worst_mass:.2e} (≤ 1e-12), equilibrium drift over 1000 steps {worst_drift:.2e} (≤ 1e-11)"),
    ))
}

fn stability_gate() -> Outcome {
    let gamma = gamma_threshold(5.0)?;
    let cfg = config(BasisKind::Jg1, 8, 5.0, [[0.0; 3]; 3]);
    let dt_max = stability_max_dt(&cfg)?;
    let formula = 3.0 * cfg.de / (2.0 * (cfg.b - 2.0 * cfg.s) * gamma);
    let mut ok = (gamma - 1.890625).abs() < 1e-15 && (dt_max - formula).abs() < 1e-15;
    let mut runner = TestRunner::new(PropConfig {
        cases: 16,
        failure_persistence: None,
        rng_seed: RngSeed::Fixed(20261017),
        ..PropConfig::default()
    });
    let result = runner.run(&(any::<u64>(), any::<bool>()), |(seed, jginf)| {
        let basis = if jginf { BasisKind::JgInf } else { BasisKind::Jg1 };
        let mut cfg = config(basis, 8, 5.0, [[0.0; 3]; 3]);
        cfg.dt = 0.9 * dt_max;
        cfg.t_end = 60.0 * cfg.dt;
        let op = assemble_operator(&cfg).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let init = SpectralState {
            coeffs: (0..op.len()).map(|_| rng.random_range(-1.0..1.0)).collect(),
            time: 0.0,
        };
        let out = run_simulation(&op, &init, None, None, &RunOptions::default())
            .map_err(|e| TestCaseError::fail(e.to_string()))?;
        let e0 = out.diagnostics[0].energy;
        for d in &out.diagnostics {
            prop_assert!(d.energy.is_finite() && d.energy <= e0 * (1.0 + 1e-10), "energy {} > {}", d.energy, e0);
        }
        Ok(())
    });
    let verdict = match &result {
        Ok(()) => "16 random runs at 0.9·dt_max with bounded energy".to_string(),
        Err(e) => {
            ok = false;
            format!("property failed: {e}")
        }
    };
    Ok((ok, format!("γ(5) = {gamma}, dt_max = {dt_max:.6}; {verdict}")))
}

fn angular_oracle() -> Outcome {
    let (worst, which) = uvw_max_deviation(8);
    Ok((worst < 1e-12, format!("max deviation {worst:.2e} ({which}) for l, l' ≤ 8 (< 1e-12)")))
}

fn radial_bandwidths() -> Outcome {
    let mut worst = 0.0_f64;
    for kind in [BasisKind::Jg1, BasisKind::JgInf] {
        for s in [5.0, 6.0] {
            worst = worst.max(radial_out_of_band(kind, s, (0..=40).step_by(2), 40));
        }
    }
    Ok((
        worst <= 1e-13,
        format!("full bandwidths 7/5/5/5, largest out-of-band entry {worst:.2e}·max (≤ 1e-13), both bases, s ∈ {{5, 6}}, even l ≤ 40 (l = 0 angular matrix unused)"),
    ))
}

fn qe_map(closures: &Closures) -> Outcome {
    let qi = &closures.integrator;
    let c0 = qi.forward([0.0; 3])?;
    let eq = c0.iter().fold(0.0_f64, |a, v| a.max((v - 1.0 / (B + 5.0)).abs()));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut trip = 0.0_f64;
    for _ in 0..100 {
        let c = random_admissible(&mut rng);
        let back = qi.forward(qi.invert(c)?.lambda)?;
        trip = trip.max((0..3).fold(0.0_f64, |a, k| a.max((back[k] - c[k]).abs())));
    }
    let mut jac = 0.0_f64;
    for _ in 0..20 {
        let lam = [0; 3].map(|_| rng.random_range(-10.0..40.0));
        let m = qi.moments(lam)?;
        for j in 0..3 {
            let h = 1e-5 * lam[j].abs().max(1.0);
            let (mut lp, mut lm) = (lam, lam);
            lp[j] += h;
            lm[j] -= h;
            let (cp, cm) = (qi.forward(lp)?, qi.forward(lm)?);
            for i in 0..3 {
                let fd = (cp[i] - cm[i]) / (2.0 * h);
                let scale = m.cov[i][j].abs().max((m.cov[i][i] * m.cov[j][j]).sqrt());
                jac = jac.max((fd - m.cov[i][j]).abs() / scale);
            }
        }
    }
    Ok((
        eq <= 1e-10 && trip <= 1e-10 && jac <= 1e-6,
        format!("forward(0) off by {eq:.1e}, round trip {trip:.1e} (≤ 1e-10), Jacobian vs covariance {jac:.1e} (≤ 1e-6)"),
    ))
}

fn closure_benchmark(closures: &Closures, refs: &mut References) -> Outcome {
    let (table, net) = (&closures.table, &closures.network);
    let fene_p = ClosureModel::FeneP(FenePVariant::Consistent);
    let pla = ClosureModel::QePla(table);
    let nn = ClosureModel::QeNn(net);
    let mut ok = true;
    let mut notes = Vec::new();
    let (mut pla_errs, mut nn_errs) = (Vec::new(), Vec::new());
    let mut slowest_ratio = f64::INFINITY;
    for kappa in KAPPAS {
        let reference = refs.get(Flow::mixed(kappa, 1.0))?;
        let rows = [&fene_p, &pla, &nn]
            .map(|m| compare_closure(m, reference))
            .into_iter()
            .collect::<Result<Vec<_>, _>>()?;
        for r in &rows {
            slowest_ratio = slowest_ratio.min(reference.seconds / r.seconds.max(1e-9));
        }
        println!(
            "  (mixed κ={kappa}: fene-p {:.3e}, qe-pla {:.3e}, qe-nn {:.3e})",
            rows[0].l2_error, rows[1].l2_error, rows[2].l2_error
        );
        if kappa == 1.0 {
            let (fp, pl, nnv) = (rows[0].l2_error, rows[1].l2_error, rows[2].l2_error);
            ok &= (3e-2..=2e-1).contains(&fp);
            ok &= (5e-5..=1e-3).contains(&pl);
            ok &= fp >= 10.0 * pl.max(nnv);
            ok &= within_factor(nnv, pl, 10.0);
            notes.push(format!("κ=1: FENE-P {fp:.2e} ∈ [3e-2, 2e-1], QE-PLA {pl:.2e} ∈ [5e-5, 1e-3], QE-NN {nnv:.2e}"));
        }
        pla_errs.push(rows[1].l2_error);
        nn_errs.push(rows[2].l2_error);
    }
    let monotone = |v: &[f64]| v.windows(2).all(|w| w[1] > w[0]);
    ok &= monotone(&pla_errs) && monotone(&nn_errs);
    ok &= slowest_ratio >= 100.0;
    notes.push(format!(
        "QE errors increase with κ: PLA {}, NN {}",
        monotone(&pla_errs),
        monotone(&nn_errs)
    ));
    notes.push(format!("closures ≥ {slowest_ratio:.0}× faster than the N=40 solve (≥ 100×)"));
    Ok((ok, notes.join("; ")))
}

fn bimodality(closures: &Closures, refs: &mut References) -> Outcome {
    let (qi, table, net) = (&closures.integrator, &closures.table, &closures.network);
    let reference = refs.get(Flow::extensional(20.0, 1.0))?;
    let spec = SliceSpec::Axis { axis: 0, n: 801 };
    let ref_peaks = count_local_maxima(&reference_slice(reference, spec)?.values(), PEAK_TOL);
    let mut ok = ref_peaks == 2;
    let mut notes = vec![format!("reference {ref_peaks}")];
    let models = [
        (ClosureModel::FeneP(FenePVariant::Consistent), 1),
        (ClosureModel::FeneP(FenePVariant::Printed), 1),
        (ClosureModel::QePla(table), 2),
        (ClosureModel::QeNn(net), 2),
        (ClosureModel::QeExact(qi), 2),
    ];
    for (model, want) in models {
        let cmp = compare_closure(&model, reference)?;
        let slice = closure_slice(&model, &cmp.conformation, B, &reference.grid, spec)?;
        let peaks = count_local_maxima(&slice.values(), PEAK_TOL);
        ok &= peaks == want;
        notes.push(format!("{} {peaks}", model.name()));
    }
    Ok((ok, format!("peaks along the stretching axis: {}", notes.join(", "))))
}

fn fene_p_stress(refs: &mut References) -> Outcome {
    let model = ClosureModel::FeneP(FenePVariant::Consistent);
    let mut ok = true;
    let mut notes = Vec::new();
    let mut n1 = Vec::new();
    for (de, tau_want, n1_want) in [(1.0, Some(3.31e-3), Some(1.66e-2)), (2.0, Some(5.58e-3), Some(3.62e-2)), (10.0, None, None)] {
        let reference = refs.get(Flow::mixed(1.0, de))?;
        let r = compare_closure(&model, reference)?;
        if let (Some(t), Some(n)) = (tau_want, n1_want) {
            ok &= within_factor(r.tau12_error, t, 3.0) && within_factor(r.n1_error, n, 3.0);
        }
        notes.push(format!("De={de}: τ12 {:.2e}, N1 {:.2e}", r.tau12_error, r.n1_error));
        n1.push(r.n1_error);
    }
    let growth = n1[2] / n1[0];
    ok &= growth > 10.0;
    notes.push(format!("N1 growth De 1→10 {growth:.1}× (> 10×)"));
    Ok((ok, notes.join("; ")))
}

fn smoothness(closures: &Closures) -> Outcome {
    let table = &closures.table;
    let net = &closures.network;
    let grid = table.grid;
    let norm = |v: [f64; 3]| v.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    let deriv = |f: &dyn Fn([f64; 3]) -> [f64; 3], w: [f64; 3], axis: usize, h: f64| {
        let (mut wp, mut wm) = (w, w);
        wp[axis] += h;
        wm[axis] -= h;
        let (a, b) = (f(grid.point(wp)), f(grid.point(wm)));
        [0, 1, 2].map(|k| (a[k] - b[k]) / (2.0 * h))
    };
    let jump = |f: &dyn Fn([f64; 3]) -> [f64; 3], mut w: [f64; 3], axis: usize, face: f64, delta: f64| {
        w[axis] = face - delta;
        let l = deriv(f, w, axis, 0.1 * delta);
        w[axis] = face + delta;
        let r = deriv(f, w, axis, 0.1 * delta);
        norm([0, 1, 2].map(|k| l[k] - r[k])) / norm(l).max(norm(r)).max(1e-12)
    };
    let pla = |c: [f64; 3]| pla_lookup(table, c).unwrap();
    let nn = |c: [f64; 3]| nn_infer(net, c);
    let mut runner = TestRunner::new(PropConfig {
        cases: 30,
        failure_persistence: None,
        rng_seed: RngSeed::Fixed(20261017),
        ..PropConfig::default()
    });
    let strategy = (0usize..3, 0.15f64..0.85, [0.2f64..0.8, 0.2f64..0.8, 0.2f64..0.8]);
    let worst = std::cell::RefCell::new((f64::INFINITY, 0.0_f64));
    let result = runner.run(&strategy, |(axis, frac, w)| {
        let cells = grid.shape[axis] - 1;
        let face = (frac * cells as f64).round() / cells as f64;
        let delta = 1e-3 / cells as f64;
        let (pc, pf) = (jump(&pla, w, axis, face, delta), jump(&pla, w, axis, face, 0.1 * delta));
        let (nc, nf) = (jump(&nn, w, axis, face, delta), jump(&nn, w, axis, face, 0.1 * delta));
        let mut wst = worst.borrow_mut();
        wst.0 = wst.0.min(pf);
        wst.1 = wst.1.max(nf);
        // a kink keeps its jump as the probes approach the face
        prop_assert!(pf > 1e-4 && pf > 0.5 * pc, "lookup jump {pc:e} -> {pf:e}");
        // a continuous derivative loses its apparent jump with the distance
        prop_assert!(nf <= 0.2 * nc + 1e-8, "network jump {nc:e} -> {nf:e}");
        Ok(())
    });
    let (pla_min, nn_max) = *worst.borrow();
    let detail = format!("smallest lookup face jump {pla_min:.2e}, largest network jump {nn_max:.2e}");
    Ok(match result {
        Ok(()) => (pla_min > 10.0 * nn_max, format!("30 random faces: {detail}")),
        Err(e) => (false, format!("{e}; {detail}")),
    })
}

fn main() {
    let start = Instant::now();
    let mut results: Vec<(&str, bool, String)> = Vec::new();
    let mut record = |name: &'static str, outcome: Outcome| {
        let (ok, msg) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
        println!("{} {name}: {msg}", if ok { "PASS" } else { "FAIL" });
        results.push((name, ok, msg));
    };
    record("degrees of freedom", dof_counts());
    record("radial matrix bandwidths", radial_bandwidths());
    record("angular matrices vs direct quadrature", angular_oracle());
    record("mass conservation and equilibrium stationarity", mass_and_stationarity());
    record("stability gate", stability_gate());
    match Closures::new() {
        Ok(closures) => {
            let mut refs = References::default();
            record("quasi-equilibrium map", qe_map(&closures));
            record("lookup vs network smoothness", smoothness(&closures));
            record("closure benchmark ordering", closure_benchmark(&closures, &mut refs));
            record("FENE-P stress errors", fene_p_stress(&mut refs));
            record("bimodality at extensional κ=20", bimodality(&closures, &mut refs));
        }
        Err(e) => {
            for name in [
                "quasi-equilibrium map",
                "lookup vs network smoothness",
                "closure benchmark ordering",
                "FENE-P stress errors",
                "bimodality at extensional κ=20",
            ] {
                record(name, Err(format!("closure setup failed: {e}").into()));
            }
        }
    }
    record("MMS spectral convergence", mms_convergence());
    let failed = results.iter().filter(|r| !r.1).count();
    println!(
        "\n{} of {} criteria passed in {:.0} s",
        results.len() - failed,
        results.len(),
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
