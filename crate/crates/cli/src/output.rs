//! Table files with provenance headers and JSON run sidecars.
//!
//! Tables hold only deterministic content so that identical specifications
//! reproduce them byte for byte; wall-clock data lives in the sidecar.

use crate::error::CliResult;
use crate::spec::ExperimentSpec;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

pub const CODE_VERSION: &str = concat!("fene-cli ", env!("CARGO_PKG_VERSION"));

/// Shortest round-trip decimal form.
pub fn num(v: f64) -> String {
    format!("{v:e}")
}

/// Output location and provenance of one experiment run.
pub struct RunContext {
    pub output_dir: PathBuf,
    pub spec: ExperimentSpec,
    pub seed: Option<u64>,
    started: Instant,
    started_unix: f64,
    files: Vec<PathBuf>,
}

/// Timing of one table row, solve phase only.
#[derive(Debug, Clone, Serialize)]
pub struct RowTiming {
    pub table: String,
    pub row: String,
    pub seconds: f64,
}

#[derive(Serialize)]
struct RunRecord<'a> {
    experiment: &'static str,
    code_version: &'static str,
    spec_sha256: String,
    seed: Option<u64>,
    started_unix_seconds: f64,
    wall_clock_seconds: f64,
    timing_scope: &'static str,
    files: Vec<String>,
    timings: &'a [RowTiming],
    spec: serde_json::Value,
}

impl RunContext {
    pub fn new(output_dir: &Path, spec: ExperimentSpec, seed: Option<u64>) -> CliResult<Self> {
        std::fs::create_dir_all(output_dir)?;
        let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
        Ok(Self {
            output_dir: output_dir.to_path_buf(),
            spec,
            seed,
            started: Instant::now(),
            started_unix,
            files: Vec::new(),
        })
    }

    pub fn experiment(&self) -> &'static str {
        self.spec.kind().name()
    }

    pub fn sidecar_name(&self) -> String {
        format!("{}.run.json", self.experiment())
    }

    /// Path inside the output directory, recorded as an output.
    pub fn output_path(&mut self, name: &str) -> PathBuf {
        let p = self.output_dir.join(name);
        self.record(p.clone());
        p
    }

    /// Records a file written on the run's behalf.
    pub fn record(&mut self, path: PathBuf) {
        self.files.push(path);
    }

    fn provenance(&self) -> String {
        let mut h = String::new();
        let _ = writeln!(h, "# experiment: {}", self.experiment());
        let _ = writeln!(h, "# code_version: {CODE_VERSION}");
        let _ = writeln!(h, "# spec_sha256: {}", self.spec.hash());
        let _ = writeln!(h, "# seed: {}", self.seed.map_or("none".to_string(), |s| s.to_string()));
        let _ = writeln!(
            h,
            "# timing: solve phase only (assembly excluded); wall-clock and per-row seconds in {}",
            self.sidecar_name()
        );
        h
    }

    /// Writes a CSV table preceded by the provenance header.
    pub fn write_table(&mut self, name: &str, columns: &[&str], rows: &[Vec<String>]) -> CliResult<PathBuf> {
        let mut text = self.provenance();
        text.push_str(&columns.join(","));
        text.push('\n');
        for r in rows {
            text.push_str(&r.join(","));
            text.push('\n');
        }
        let path = self.output_path(name);
        std::fs::write(&path, text)?;
        Ok(path)
    }

    /// Writes the run sidecar and returns the list of produced files.
    pub fn finish(mut self, timings: &[RowTiming]) -> CliResult<Vec<PathBuf>> {
        let sidecar = self.output_dir.join(self.sidecar_name());
        self.files.push(sidecar.clone());
        let record = RunRecord {
            experiment: self.experiment(),
            code_version: CODE_VERSION,
            spec_sha256: self.spec.hash(),
            seed: self.seed,
            started_unix_seconds: self.started_unix,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
            timing_scope: "solve phase only, assembly and table or weight loading excluded",
            files: self.files.iter().map(|p| p.display().to_string()).collect(),
            timings,
            spec: self.spec.to_json(),
        };
        let text = serde_json::to_string_pretty(&record).expect("run record serializes");
        std::fs::write(&sidecar, text + "\n")?;
        Ok(self.files)
    }
}
