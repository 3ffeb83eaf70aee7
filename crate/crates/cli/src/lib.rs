//! Experiment runner for the FENE spectral solver and closure models.

pub mod error;
pub mod experiments;
pub mod output;
pub mod spec;

pub use error::{CliError, CliResult};

use clap::{Args, Parser, Subcommand};
use spec::ExperimentKind;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "fene", version, about = "Run FENE spectral solver and closure experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Manufactured-solution convergence table for both radial bases.
    #[command(name = "mms_convergence")]
    MmsConvergence(RunArgs),
    /// Closure errors, stresses and density slices in extensional flow.
    #[command(name = "benchmark_extensional")]
    BenchmarkExtensional(RunArgs),
    /// Closure errors, stresses and density slices in mixed flow.
    #[command(name = "benchmark_mixed")]
    BenchmarkMixed(RunArgs),
    /// Training pairs (c, λ) through the quasi-equilibrium forward map.
    #[command(name = "gen_dataset")]
    GenDataset(RunArgs),
    /// Piecewise-linear multiplier lookup table.
    #[command(name = "build_pla_table")]
    BuildPlaTable(RunArgs),
    /// Closure density errors over a flow-rate sweep, one column per model.
    #[command(name = "compare_closures")]
    CompareClosures(RunArgs),
    /// Peterlin-closure density and stress errors over a Deborah sweep.
    #[command(name = "fene_p_stress_table")]
    FenePStressTable(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// TOML file with experiment parameters; defaults apply when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory for tables and the run sidecar.
    #[arg(long, default_value = "results")]
    pub output_dir: PathBuf,
    /// Random seed (dataset sampling); recorded in every output.
    #[arg(long)]
    pub seed: Option<u64>,
    /// `key=value` parameter override, dotted keys for nested tables.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Check and print the normalized specification without running.
    #[arg(long)]
    pub dry_run: bool,
}

impl Command {
    pub fn parts(&self) -> (ExperimentKind, &RunArgs) {
        match self {
            Command::MmsConvergence(a) => (ExperimentKind::MmsConvergence, a),
            Command::BenchmarkExtensional(a) => (ExperimentKind::BenchmarkExtensional, a),
            Command::BenchmarkMixed(a) => (ExperimentKind::BenchmarkMixed, a),
            Command::GenDataset(a) => (ExperimentKind::GenDataset, a),
            Command::BuildPlaTable(a) => (ExperimentKind::BuildPlaTable, a),
            Command::CompareClosures(a) => (ExperimentKind::CompareClosures, a),
            Command::FenePStressTable(a) => (ExperimentKind::FenePStressTable, a),
        }
    }
}

/// Loads, checks and runs one experiment; returns the files written.
pub fn run(command: &Command) -> CliResult<Vec<PathBuf>> {
    let (kind, args) = command.parts();
    let spec = spec::load_spec(kind, args.config.as_deref(), &args.overrides, args.seed)?;
    if args.dry_run {
        println!("{}", serde_json::to_string_pretty(&spec.to_json()).expect("specification serializes"));
        return Ok(Vec::new());
    }
    let ctx = output::RunContext::new(&args.output_dir, spec, args.seed)?;
    experiments::run_experiment(ctx)
}
