//! Experiment specifications: TOML file plus `key=value` overrides, typed,
//! defaulted and checked before anything runs.

use crate::error::{validation, CliResult};
use fene_core::benchmark::{Flow, ReferenceSettings};
use fene_core::closures::{FenePVariant, PlaGridSpec, SamplingSpec};
use fene_core::mms::MmsProblem;
use fene_core::radial::BasisKind;
use fene_core::solver::{stability_max_dt, SolverConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    MmsConvergence,
    BenchmarkExtensional,
    BenchmarkMixed,
    GenDataset,
    BuildPlaTable,
    CompareClosures,
    FenePStressTable,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::MmsConvergence,
        ExperimentKind::BenchmarkExtensional,
        ExperimentKind::BenchmarkMixed,
        ExperimentKind::GenDataset,
        ExperimentKind::BuildPlaTable,
        ExperimentKind::CompareClosures,
        ExperimentKind::FenePStressTable,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::MmsConvergence => "mms_convergence",
            ExperimentKind::BenchmarkExtensional => "benchmark_extensional",
            ExperimentKind::BenchmarkMixed => "benchmark_mixed",
            ExperimentKind::GenDataset => "gen_dataset",
            ExperimentKind::BuildPlaTable => "build_pla_table",
            ExperimentKind::CompareClosures => "compare_closures",
            ExperimentKind::FenePStressTable => "fene_p_stress_table",
        }
    }
}

/// Closure model selector as written in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelName {
    #[serde(rename = "fene-p")]
    FeneP,
    #[serde(rename = "fene-p-consistent")]
    FenePConsistent,
    #[serde(rename = "qe-pla")]
    QePla,
    #[serde(rename = "qe-nn")]
    QeNn,
    #[serde(rename = "qe-exact")]
    QeExact,
}

impl ModelName {
    pub fn label(self) -> &'static str {
        match self {
            ModelName::FeneP => "fene-p",
            ModelName::FenePConsistent => "fene-p-consistent",
            ModelName::QePla => "qe-pla",
            ModelName::QeNn => "qe-nn",
            ModelName::QeExact => "qe-exact",
        }
    }

    pub fn fene_p_variant(self) -> Option<FenePVariant> {
        match self {
            ModelName::FeneP => Some(FenePVariant::Printed),
            ModelName::FenePConsistent => Some(FenePVariant::Consistent),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowName {
    Extensional,
    Mixed,
}

impl FlowName {
    pub fn flow(self, kappa: f64, de: f64) -> Flow {
        match self {
            FlowName::Extensional => Flow::extensional(kappa, de),
            FlowName::Mixed => Flow::mixed(kappa, de),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FlowName::Extensional => "extensional",
            FlowName::Mixed => "mixed",
        }
    }
}

/// Spectral reference resolution and stopping rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceSpec {
    pub n: usize,
    pub basis: BasisKind,
    pub dt: f64,
    /// Final time in units of `De` when steady state is not reached first.
    pub t_max_per_de: f64,
    pub steady_tolerance: f64,
    pub grid_extra: usize,
}

impl Default for ReferenceSpec {
    fn default() -> Self {
        let r = ReferenceSettings::default();
        Self {
            n: r.n,
            basis: r.basis,
            dt: r.dt,
            t_max_per_de: r.t_max_per_de,
            steady_tolerance: r.steady_tolerance,
            grid_extra: r.grid_extra,
        }
    }
}

impl ReferenceSpec {
    pub fn settings(&self, b: f64, s: f64) -> ReferenceSettings {
        ReferenceSettings {
            b,
            s,
            n: self.n,
            basis: self.basis,
            dt: self.dt,
            t_max_per_de: self.t_max_per_de,
            steady_tolerance: self.steady_tolerance,
            grid_extra: self.grid_extra,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MmsSpec {
    pub b: f64,
    pub s: f64,
    pub de: f64,
    pub k: [[f64; 3]; 3],
    pub t0: f64,
    pub t_end: f64,
    pub dt: f64,
    /// Time step used from `fine_dt_from` upward, where the coarse step's
    /// temporal error would mask the spatial error.
    pub fine_dt: f64,
    pub fine_dt_from: usize,
    /// `L = N` values.
    pub resolutions: Vec<usize>,
    pub bases: Vec<BasisKind>,
    /// Per-run wall-clock limit; unlimited when absent.
    pub time_budget_seconds: Option<f64>,
}

impl Default for MmsSpec {
    fn default() -> Self {
        let p = MmsProblem::default();
        Self {
            b: p.b,
            s: p.s,
            de: p.de,
            k: p.k,
            t0: p.t0,
            t_end: p.t_end,
            dt: p.dt,
            fine_dt: 2.5e-5,
            fine_dt_from: 40,
            resolutions: vec![10, 20, 30, 40],
            bases: vec![BasisKind::Jg1, BasisKind::JgInf],
            time_budget_seconds: None,
        }
    }
}

impl MmsSpec {
    pub fn problem(&self, n: usize) -> MmsProblem {
        MmsProblem {
            b: self.b,
            s: self.s,
            de: self.de,
            k: self.k,
            t0: self.t0,
            t_end: self.t_end,
            dt: if n >= self.fine_dt_from { self.fine_dt } else { self.dt },
        }
    }
}

/// Where the closure models get their multiplier maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClosureSources {
    /// Prebuilt lookup table; built in memory at `pla_shape` when absent.
    pub pla_table: Option<PathBuf>,
    pub pla_shape: [usize; 3],
    /// Network weights, required by `qe-nn`.
    pub nn_weights: Option<PathBuf>,
}

impl Default for ClosureSources {
    fn default() -> Self {
        Self {
            pla_table: None,
            pla_shape: PlaGridSpec::default().shape,
            nn_weights: None,
        }
    }
}

/// Closure benchmark against the spectral reference over a family of
/// flows of one kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkSpec {
    pub b: f64,
    pub s: f64,
    pub de: f64,
    pub kappas: Vec<f64>,
    pub models: Vec<ModelName>,
    /// Coarser spectral solutions reported alongside the closures.
    pub spectral_resolutions: Vec<usize>,
    /// Points of the density slice along the `q₁` axis.
    pub slice_points: usize,
    pub reference: ReferenceSpec,
    #[serde(flatten)]
    pub closures: ClosureSources,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        Self {
            b: 12.0,
            s: 6.0,
            de: 1.0,
            kappas: vec![1.0, 2.0, 5.0, 10.0, 20.0],
            models: vec![ModelName::FeneP, ModelName::FenePConsistent, ModelName::QePla],
            spectral_resolutions: vec![20],
            slice_points: 401,
            reference: ReferenceSpec::default(),
            closures: ClosureSources::default(),
        }
    }
}

/// Closure density errors over a κ sweep, one column per model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareSpec {
    pub flow: FlowName,
    pub b: f64,
    pub s: f64,
    pub de: f64,
    pub kappas: Vec<f64>,
    pub models: Vec<ModelName>,
    pub reference: ReferenceSpec,
    #[serde(flatten)]
    pub closures: ClosureSources,
}

impl Default for CompareSpec {
    fn default() -> Self {
        let bench = BenchmarkSpec::default();
        Self {
            flow: FlowName::Mixed,
            b: bench.b,
            s: bench.s,
            de: bench.de,
            kappas: bench.kappas,
            models: bench.models,
            reference: bench.reference,
            closures: bench.closures,
        }
    }
}

/// Peterlin-closure density and stress errors over a Deborah sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StressSpec {
    pub flow: FlowName,
    pub b: f64,
    pub s: f64,
    pub kappa: f64,
    pub deborah: Vec<f64>,
    pub models: Vec<ModelName>,
    pub reference: ReferenceSpec,
}

impl Default for StressSpec {
    fn default() -> Self {
        Self {
            flow: FlowName::Mixed,
            b: 12.0,
            s: 6.0,
            kappa: 1.0,
            deborah: vec![1.0, 2.0, 5.0, 10.0],
            models: vec![ModelName::FeneP, ModelName::FenePConsistent],
            reference: ReferenceSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSpec {
    pub b: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub count: usize,
    pub trace_margin: f64,
    pub seed: u64,
    /// File name inside the output directory; the metadata sidecar sits
    /// next to it with a `.json` extension.
    pub output: String,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        let s = SamplingSpec::default();
        Self {
            b: 12.0,
            lambda_min: s.lambda_min,
            lambda_max: s.lambda_max,
            count: s.count,
            trace_margin: s.trace_margin,
            seed: s.seed,
            output: "qe_dataset.csv".into(),
        }
    }
}

impl DatasetSpec {
    pub fn sampling(&self) -> SamplingSpec {
        SamplingSpec {
            lambda_min: self.lambda_min,
            lambda_max: self.lambda_max,
            count: self.count,
            seed: self.seed,
            trace_margin: self.trace_margin,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlaSpec {
    pub b: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub c_floor: f64,
    pub shape: [usize; 3],
    pub output: String,
}

impl Default for PlaSpec {
    fn default() -> Self {
        let g = PlaGridSpec::default();
        Self {
            b: 12.0,
            t_min: g.t_min,
            t_max: g.t_max,
            c_floor: g.c_floor,
            shape: g.shape,
            output: "pla_table.json".into(),
        }
    }
}

impl PlaSpec {
    pub fn grid(&self) -> PlaGridSpec {
        PlaGridSpec {
            t_min: self.t_min,
            t_max: self.t_max,
            c_floor: self.c_floor,
            shape: self.shape,
        }
    }
}

/// A fully defaulted and checked experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExperimentSpec {
    MmsConvergence(MmsSpec),
    BenchmarkExtensional(BenchmarkSpec),
    BenchmarkMixed(BenchmarkSpec),
    GenDataset(DatasetSpec),
    BuildPlaTable(PlaSpec),
    CompareClosures(CompareSpec),
    FenePStressTable(StressSpec),
}

impl ExperimentSpec {
    pub fn kind(&self) -> ExperimentKind {
        match self {
            ExperimentSpec::MmsConvergence(_) => ExperimentKind::MmsConvergence,
            ExperimentSpec::BenchmarkExtensional(_) => ExperimentKind::BenchmarkExtensional,
            ExperimentSpec::BenchmarkMixed(_) => ExperimentKind::BenchmarkMixed,
            ExperimentSpec::GenDataset(_) => ExperimentKind::GenDataset,
            ExperimentSpec::BuildPlaTable(_) => ExperimentKind::BuildPlaTable,
            ExperimentSpec::CompareClosures(_) => ExperimentKind::CompareClosures,
            ExperimentSpec::FenePStressTable(_) => ExperimentKind::FenePStressTable,
        }
    }

    /// Canonical JSON of the normalized specification.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("specification serializes")
    }

    /// SHA-256 of the canonical JSON, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().to_string().as_bytes()))
    }

    /// Every violated invariant, each prefixed with its field path.
    pub fn problems(&self) -> Vec<String> {
        let mut c = Checks::default();
        match self {
            ExperimentSpec::MmsConvergence(m) => check_mms(&mut c, m),
            ExperimentSpec::BenchmarkExtensional(b) | ExperimentSpec::BenchmarkMixed(b) => check_benchmark(&mut c, b),
            ExperimentSpec::GenDataset(d) => check_dataset(&mut c, d),
            ExperimentSpec::BuildPlaTable(p) => check_pla(&mut c, p),
            ExperimentSpec::CompareClosures(s) => check_compare(&mut c, s),
            ExperimentSpec::FenePStressTable(s) => check_stress(&mut c, s),
        }
        c.0
    }
}

/// Reads the configuration (if any), applies overrides and the seed, fills
/// defaults and checks every invariant.
pub fn load_spec(kind: ExperimentKind, config: Option<&Path>, overrides: &[String], seed: Option<u64>) -> CliResult<ExperimentSpec> {
    let mut table = match config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| validation(format!("cannot read config {}: {e}", path.display())))?;
            toml::from_str::<toml::Table>(&text)
                .map_err(|e| validation(format!("config {}: {e}", path.display())))?
        }
        None => toml::Table::new(),
    };
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    if let Some(seed) = seed {
        if kind == ExperimentKind::GenDataset {
            table.insert("seed".into(), toml::Value::Integer(seed as i64));
        }
    }
    let spec = match kind {
        ExperimentKind::MmsConvergence => ExperimentSpec::MmsConvergence(typed(table)?),
        ExperimentKind::BenchmarkExtensional => ExperimentSpec::BenchmarkExtensional(typed(table)?),
        ExperimentKind::BenchmarkMixed => ExperimentSpec::BenchmarkMixed(typed(table)?),
        ExperimentKind::GenDataset => ExperimentSpec::GenDataset(typed(table)?),
        ExperimentKind::BuildPlaTable => ExperimentSpec::BuildPlaTable(typed(table)?),
        ExperimentKind::CompareClosures => ExperimentSpec::CompareClosures(typed(table)?),
        ExperimentKind::FenePStressTable => ExperimentSpec::FenePStressTable(typed(table)?),
    };
    let problems = spec.problems();
    if !problems.is_empty() {
        return Err(validation(format!("invalid {} specification:\n  {}", kind.name(), problems.join("\n  "))));
    }
    Ok(spec)
}

fn typed<T: DeserializeOwned>(table: toml::Table) -> CliResult<T> {
    T::deserialize(toml::Value::Table(table)).map_err(|e| validation(format!("configuration: {e}")))
}

/// Sets the dotted key of a `key=value` override. The value is read as a
/// TOML value and falls back to a plain string.
pub fn apply_override(table: &mut toml::Table, text: &str) -> CliResult<()> {
    let (key, raw) = text
        .split_once('=')
        .ok_or_else(|| validation(format!("override '{text}' is not of the form key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(validation(format!("override '{text}' has an empty key")));
    }
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    let mut node = table;
    for part in &parts[..parts.len() - 1] {
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| validation(format!("override '{text}': '{part}' is not a table")))?;
    }
    node.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

#[derive(Default)]
struct Checks(Vec<String>);

impl Checks {
    fn require(&mut self, ok: bool, field: &str, msg: impl FnOnce() -> String) {
        if !ok {
            self.0.push(format!("{field}: {}", msg()));
        }
    }

    fn positive(&mut self, field: &str, v: f64) {
        self.require(v.is_finite() && v > 0.0, field, || format!("must be positive and finite, got {v}"));
    }

    fn physics(&mut self, b: f64, s: f64) {
        self.positive("b", b);
        self.require(s.is_finite() && s > 1.0 && s <= 0.5 * b, "s", || {
            format!("weight index must satisfy 1 < s <= b/2 = {}, got {s}", 0.5 * b)
        });
    }

    fn velocity_gradient(&mut self, k: &[[f64; 3]; 3]) {
        let finite = k.iter().flatten().all(|v| v.is_finite());
        let tr = k[0][0] + k[1][1] + k[2][2];
        self.require(finite, "k", || "entries must be finite".into());
        self.require(!finite || tr.abs() <= 1e-14, "k", || {
            format!("velocity gradient must be traceless (incompressible flow), trace = {tr}")
        });
    }

    fn time_step(&mut self, field: &str, cfg: &SolverConfig) {
        self.positive(field, cfg.dt);
        if cfg.s > 1.0 && cfg.de > 0.0 {
            if let Ok(limit) = stability_max_dt(cfg) {
                self.require(cfg.dt < limit, field, || {
                    format!("{} exceeds the energy-stability bound {limit}", cfg.dt)
                });
            }
        }
    }

    fn resolution(&mut self, field: &str, n: usize) {
        self.require(n >= 2 && n % 2 == 0, field, || format!("resolution must be even and at least 2, got {n}"));
    }

    fn reference(&mut self, r: &ReferenceSpec, b: f64, s: f64, de: f64) {
        self.resolution("reference.n", r.n);
        self.positive("reference.t_max_per_de", r.t_max_per_de);
        self.positive("reference.steady_tolerance", r.steady_tolerance);
        let flow = Flow::mixed(0.0, de);
        self.time_step("reference.dt", &r.settings(b, s).config(&flow));
    }

    fn kappas(&mut self, kappas: &[f64]) {
        self.require(!kappas.is_empty(), "kappas", || "at least one flow rate is required".into());
        for (i, k) in kappas.iter().enumerate() {
            self.require(k.is_finite(), &format!("kappas[{i}]"), || format!("must be finite, got {k}"));
        }
    }

    fn models(&mut self, models: &[ModelName], sources: Option<&ClosureSources>) {
        self.require(!models.is_empty(), "models", || "at least one model is required".into());
        for (i, m) in models.iter().enumerate() {
            self.require(!models[..i].contains(m), &format!("models[{i}]"), || format!("'{}' is listed twice", m.label()));
        }
        let Some(src) = sources else {
            for (i, m) in models.iter().enumerate() {
                self.require(m.fene_p_variant().is_some(), &format!("models[{i}]"), || {
                    format!("'{}' is not a Peterlin variant (fene-p or fene-p-consistent)", m.label())
                });
            }
            return;
        };
        if models.contains(&ModelName::QeNn) {
            match &src.nn_weights {
                None => self.0.push("nn_weights: required by model 'qe-nn'".into()),
                Some(p) => self.require(p.is_file(), "nn_weights", || format!("file {} not found", p.display())),
            }
        }
        if let Some(p) = &src.pla_table {
            self.require(p.is_file(), "pla_table", || format!("file {} not found", p.display()));
        }
        self.require(src.pla_shape.iter().all(|&n| n >= 2), "pla_shape", || "every axis needs at least 2 nodes".into());
    }
}

fn check_mms(c: &mut Checks, m: &MmsSpec) {
    c.physics(m.b, m.s);
    c.positive("de", m.de);
    c.velocity_gradient(&m.k);
    c.require(m.t0.is_finite() && m.t_end > m.t0, "t_end", || format!("must exceed t0 = {}, got {}", m.t0, m.t_end));
    c.require(m.t0 > 0.0, "t0", || format!("the manufactured solution needs t0 > 0, got {}", m.t0));
    c.require(!m.resolutions.is_empty(), "resolutions", || "at least one resolution is required".into());
    for (i, &n) in m.resolutions.iter().enumerate() {
        c.resolution(&format!("resolutions[{i}]"), n);
    }
    c.require(!m.bases.is_empty(), "bases", || "at least one basis is required".into());
    let mut cfg = m.problem(0).config(BasisKind::Jg1, 2);
    c.time_step("dt", &cfg);
    cfg.dt = m.fine_dt;
    c.time_step("fine_dt", &cfg);
    if let Some(t) = m.time_budget_seconds {
        c.positive("time_budget_seconds", t);
    }
}

fn check_benchmark(c: &mut Checks, b: &BenchmarkSpec) {
    c.physics(b.b, b.s);
    c.positive("de", b.de);
    c.kappas(&b.kappas);
    c.models(&b.models, Some(&b.closures));
    c.reference(&b.reference, b.b, b.s, b.de);
    for (i, &n) in b.spectral_resolutions.iter().enumerate() {
        c.resolution(&format!("spectral_resolutions[{i}]"), n);
    }
    c.require(b.slice_points >= 3, "slice_points", || format!("need at least 3 points, got {}", b.slice_points));
}

fn check_compare(c: &mut Checks, s: &CompareSpec) {
    c.physics(s.b, s.s);
    c.positive("de", s.de);
    c.kappas(&s.kappas);
    c.models(&s.models, Some(&s.closures));
    c.reference(&s.reference, s.b, s.s, s.de);
}

fn check_stress(c: &mut Checks, s: &StressSpec) {
    c.physics(s.b, s.s);
    c.require(s.kappa.is_finite(), "kappa", || format!("must be finite, got {}", s.kappa));
    c.require(!s.deborah.is_empty(), "deborah", || "at least one Deborah number is required".into());
    for (i, &de) in s.deborah.iter().enumerate() {
        c.positive(&format!("deborah[{i}]"), de);
        c.reference(&s.reference, s.b, s.s, de);
    }
    c.models(&s.models, None);
}

fn check_dataset(c: &mut Checks, d: &DatasetSpec) {
    c.positive("b", d.b);
    c.require(
        d.lambda_min.is_finite() && d.lambda_max.is_finite() && d.lambda_min < d.lambda_max,
        "lambda_max",
        || format!("sampling box [{}, {}] is empty or unbounded", d.lambda_min, d.lambda_max),
    );
    c.require(d.count > 0, "count", || "must be at least 1".into());
    c.require(d.trace_margin > 0.0 && d.trace_margin < 1.0, "trace_margin", || {
        format!("must lie in (0, 1), got {}", d.trace_margin)
    });
    c.require(!d.output.is_empty(), "output", || "file name is empty".into());
}

fn check_pla(c: &mut Checks, p: &PlaSpec) {
    c.positive("b", p.b);
    if let Err(e) = p.grid().validate() {
        c.0.push(format!("grid: {e}"));
    }
    c.require(!p.output.is_empty(), "output", || "file name is empty".into());
}
