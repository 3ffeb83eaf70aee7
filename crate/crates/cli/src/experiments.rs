//! Experiment runners: each turns a checked specification into table files.

use crate::error::{validation, CliResult};
use crate::output::{num, RowTiming, RunContext};
use crate::spec::{BenchmarkSpec, ClosureSources, CompareSpec, ExperimentSpec, FlowName, ModelName, MmsSpec, StressSpec};
use fene_core::benchmark::{
    closure_slice, compare_closure, reference_slice, solve_reference, solve_reference_with_resolution,
    spectral_density_error, ClosureComparison, ReferenceSolution,
};
use fene_core::closures::dataset::sidecar_path;
use fene_core::closures::{
    gen_dataset, nn_load, pla_build_table, ClosureModel, MlpWeights, PlaGridSpec, PlaTable, QeIntegrator,
};
use fene_core::field::{count_local_maxima, SliceSpec};
use fene_core::layout::degrees_of_freedom;
use fene_core::mms::run_mms;
use std::path::PathBuf;
use std::time::{Duration, Instant};

/// Relative tolerance of the slice peak counter.
const PEAK_TOL: f64 = 1e-3;

/// Runs a checked experiment and returns the files it wrote.
pub fn run_experiment(mut ctx: RunContext) -> CliResult<Vec<PathBuf>> {
    let spec = ctx.spec.clone();
    let timings = match &spec {
        ExperimentSpec::MmsConvergence(m) => mms_convergence(&mut ctx, m)?,
        ExperimentSpec::BenchmarkExtensional(b) => benchmark(&mut ctx, b, FlowName::Extensional)?,
        ExperimentSpec::BenchmarkMixed(b) => benchmark(&mut ctx, b, FlowName::Mixed)?,
        ExperimentSpec::CompareClosures(c) => compare_closures(&mut ctx, c)?,
        ExperimentSpec::FenePStressTable(s) => fene_p_stress_table(&mut ctx, s)?,
        ExperimentSpec::GenDataset(d) => {
            let integrator = QeIntegrator::new(d.b)?;
            let start = Instant::now();
            let ds = gen_dataset(&integrator, &d.sampling())?;
            let seconds = start.elapsed().as_secs_f64();
            let path = ctx.output_path(&d.output);
            ds.save(&path)?;
            ctx.record(sidecar_path(&path));
            eprintln!("{} records kept of {} drawn", ds.records.len(), d.count);
            vec![timing(&d.output, "generate", seconds)]
        }
        ExperimentSpec::BuildPlaTable(p) => {
            let integrator = QeIntegrator::new(p.b)?;
            let start = Instant::now();
            let table = pla_build_table(&integrator, p.grid())?;
            let seconds = start.elapsed().as_secs_f64();
            let path = ctx.output_path(&p.output);
            table.save(&path)?;
            eprintln!("table {:?} built, largest Newton residual {:e}", table.grid.shape, table.build_residual);
            vec![timing(&p.output, "build", seconds)]
        }
    };
    ctx.finish(&timings)
}

fn timing(table: &str, row: impl Into<String>, seconds: f64) -> RowTiming {
    RowTiming {
        table: table.to_string(),
        row: row.into(),
        seconds,
    }
}

fn mms_convergence(ctx: &mut RunContext, m: &MmsSpec) -> CliResult<Vec<RowTiming>> {
    let name = "mms_convergence.csv";
    let mut rows = Vec::new();
    let mut timings = Vec::new();
    for &basis in &m.bases {
        for &n in &m.resolutions {
            let budget = m.time_budget_seconds.map(Duration::from_secs_f64);
            let r = run_mms(&m.problem(n), basis, n, budget)?;
            eprintln!("{basis} N={n}: error {:e}", r.error);
            rows.push(vec![
                basis.to_string(),
                n.to_string(),
                degrees_of_freedom(basis, n, n).to_string(),
                num(r.dt),
                r.steps.to_string(),
                num(r.error),
            ]);
            timings.push(timing(name, format!("{basis} N={n}"), r.solve_seconds));
        }
    }
    ctx.write_table(name, &["basis", "n", "dof", "dt", "steps", "error"], &rows)?;
    Ok(timings)
}

/// Multiplier maps needed by the requested closure models.
struct ClosureResources {
    integrator: Option<QeIntegrator>,
    table: Option<PlaTable>,
    network: Option<MlpWeights>,
}

impl ClosureResources {
    fn load(b: f64, models: &[ModelName], src: &ClosureSources) -> CliResult<Self> {
        let needs_table = models.contains(&ModelName::QePla);
        let needs_integrator = models.contains(&ModelName::QeExact) || (needs_table && src.pla_table.is_none());
        let integrator = needs_integrator.then(|| QeIntegrator::new(b)).transpose()?;
        let table = if !needs_table {
            None
        } else if let Some(path) = &src.pla_table {
            let t = PlaTable::load(path)?;
            if (t.b - b).abs() > 1e-12 {
                return Err(validation(format!("pla_table: built for b = {}, experiment uses b = {b}", t.b)));
            }
            Some(t)
        } else {
            let grid = PlaGridSpec {
                shape: src.pla_shape,
                ..PlaGridSpec::default()
            };
            eprintln!("building lookup table {:?}", grid.shape);
            Some(pla_build_table(integrator.as_ref().expect("integrator loaded"), grid)?)
        };
        let network = match (&src.nn_weights, models.contains(&ModelName::QeNn)) {
            (Some(path), true) => {
                let w = nn_load(path)?;
                if (w.provenance.b - b).abs() > 1e-12 {
                    return Err(validation(format!(
                        "nn_weights: trained for b = {}, experiment uses b = {b}",
                        w.provenance.b
                    )));
                }
                Some(w)
            }
            _ => None,
        };
        Ok(Self {
            integrator,
            table,
            network,
        })
    }

    fn model(&self, name: ModelName) -> ClosureModel<'_> {
        if let Some(v) = name.fene_p_variant() {
            return ClosureModel::FeneP(v);
        }
        match name {
            ModelName::QePla => ClosureModel::QePla(self.table.as_ref().expect("table loaded")),
            ModelName::QeNn => ClosureModel::QeNn(self.network.as_ref().expect("network loaded")),
            _ => ClosureModel::QeExact(self.integrator.as_ref().expect("integrator loaded")),
        }
    }
}

fn solve(flow: FlowName, kappa: f64, de: f64, settings: &fene_core::benchmark::ReferenceSettings) -> CliResult<ReferenceSolution> {
    let r = solve_reference(&flow.flow(kappa, de), settings)?;
    if !r.reached_steady_state {
        eprintln!("warning: reference {} κ={kappa} De={de} stopped at t_max before steady state", flow.name());
    }
    Ok(r)
}

fn stress_columns(cmp: &ClosureComparison) -> [String; 5] {
    [
        num(cmp.l2_error),
        num(cmp.stress.shear()),
        num(cmp.stress.n1()),
        num(cmp.tau12_error),
        num(cmp.n1_error),
    ]
}

fn benchmark(ctx: &mut RunContext, b: &BenchmarkSpec, flow: FlowName) -> CliResult<Vec<RowTiming>> {
    let res = ClosureResources::load(b.b, &b.models, &b.closures)?;
    let settings = b.reference.settings(b.b, b.s);
    let table_name = format!("benchmark_{}.csv", flow.name());
    let slice = SliceSpec::Axis { axis: 0, n: b.slice_points };
    let mut rows = Vec::new();
    let mut timings = Vec::new();
    for &kappa in &b.kappas {
        let reference = solve(flow, kappa, b.de, &settings)?;
        let ref_label = format!("spectral-N{}", settings.n);
        let ref_slice = reference_slice(&reference, slice)?;
        let mut slice_cols = vec!["x".to_string(), ref_label.clone()];
        let mut slice_data: Vec<Vec<f64>> = ref_slice.rows.clone();
        let peaks = count_local_maxima(&ref_slice.values(), PEAK_TOL);
        let (tau, n1) = (reference.stress.shear(), reference.stress.n1());
        rows.push(vec![
            num(kappa),
            ref_label.clone(),
            num(0.0),
            num(tau),
            num(n1),
            num(0.0),
            num(0.0),
            peaks.to_string(),
            reference.steps.to_string(),
        ]);
        timings.push(timing(&table_name, format!("κ={kappa} {ref_label}"), reference.seconds));
        for &n in b.spectral_resolutions.iter().filter(|&&n| n < settings.n) {
            let coarse = solve_reference_with_resolution(&flow.flow(kappa, b.de), &settings, n)?;
            let err = spectral_density_error(&coarse, &reference)?;
            let label = format!("spectral-N{n}");
            let s = reference_slice(&coarse, slice)?;
            let peaks = count_local_maxima(&s.values(), PEAK_TOL);
            rows.push(vec![
                num(kappa),
                label.clone(),
                num(err),
                num(coarse.stress.shear()),
                num(coarse.stress.n1()),
                num((coarse.stress.shear() - tau).abs()),
                num((coarse.stress.n1() - n1).abs()),
                peaks.to_string(),
                coarse.steps.to_string(),
            ]);
            timings.push(timing(&table_name, format!("κ={kappa} {label}"), coarse.seconds));
            slice_cols.push(label);
            for (row, v) in slice_data.iter_mut().zip(s.values()) {
                row.push(v);
            }
        }
        for &m in &b.models {
            let model = res.model(m);
            let cmp = compare_closure(&model, &reference)?;
            let s = closure_slice(&model, &cmp.conformation, b.b, &reference.grid, slice)?;
            let peaks = count_local_maxima(&s.values(), PEAK_TOL);
            let mut row = vec![num(kappa), m.label().to_string()];
            row.extend(stress_columns(&cmp));
            row.push(peaks.to_string());
            row.push(cmp.steps.to_string());
            rows.push(row);
            timings.push(timing(&table_name, format!("κ={kappa} {}", m.label()), cmp.seconds));
            slice_cols.push(m.label().to_string());
            for (row, v) in slice_data.iter_mut().zip(s.values()) {
                row.push(v);
            }
        }
        let cols: Vec<&str> = slice_cols.iter().map(String::as_str).collect();
        let data: Vec<Vec<String>> = slice_data.iter().map(|r| r.iter().map(|&v| num(v)).collect()).collect();
        ctx.write_table(&format!("benchmark_{}_slice_kappa{kappa}.csv", flow.name()), &cols, &data)?;
    }
    ctx.write_table(
        &table_name,
        &["kappa", "method", "l2_error", "tau12", "n1", "tau12_error", "n1_error", "slice_peaks", "steps"],
        &rows,
    )?;
    Ok(timings)
}

fn compare_closures(ctx: &mut RunContext, c: &CompareSpec) -> CliResult<Vec<RowTiming>> {
    let res = ClosureResources::load(c.b, &c.models, &c.closures)?;
    let settings = c.reference.settings(c.b, c.s);
    let name = "compare_closures.csv";
    let mut rows = Vec::new();
    let mut timings = Vec::new();
    for &kappa in &c.kappas {
        let reference = solve(c.flow, kappa, c.de, &settings)?;
        timings.push(timing(name, format!("κ={kappa} spectral-N{}", settings.n), reference.seconds));
        let mut row = vec![num(kappa)];
        for &m in &c.models {
            let cmp = compare_closure(&res.model(m), &reference)?;
            row.push(num(cmp.l2_error));
            timings.push(timing(name, format!("κ={kappa} {}", m.label()), cmp.seconds));
        }
        rows.push(row);
    }
    let mut cols = vec!["kappa"];
    cols.extend(c.models.iter().map(|m| m.label()));
    ctx.write_table(name, &cols, &rows)?;
    Ok(timings)
}

fn fene_p_stress_table(ctx: &mut RunContext, s: &StressSpec) -> CliResult<Vec<RowTiming>> {
    let settings = s.reference.settings(s.b, s.s);
    let name = "fene_p_stress_table.csv";
    let mut rows = Vec::new();
    let mut timings = Vec::new();
    for &de in &s.deborah {
        let reference = solve(s.flow, s.kappa, de, &settings)?;
        timings.push(timing(name, format!("De={de} spectral-N{}", settings.n), reference.seconds));
        for &m in &s.models {
            let variant = m.fene_p_variant().expect("checked Peterlin variant");
            let cmp = compare_closure(&ClosureModel::FeneP(variant), &reference)?;
            rows.push(vec![
                num(de),
                m.label().to_string(),
                num(cmp.l2_error),
                num(cmp.tau12_error),
                num(cmp.n1_error),
                num(reference.stress.shear()),
                num(reference.stress.n1()),
            ]);
            timings.push(timing(name, format!("De={de} {}", m.label()), cmp.seconds));
        }
    }
    ctx.write_table(
        name,
        &["de", "method", "l2_error", "tau12_error", "n1_error", "tau12_reference", "n1_reference"],
        &rows,
    )?;
    Ok(timings)
}
