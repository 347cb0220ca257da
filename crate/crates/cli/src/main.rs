//! `crowdtrack` command-line interface.

mod commands;
mod fail;
mod files;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crowdtrack::config::RunConfig;

use crate::fail::Failure;

#[derive(Debug, Parser)]
#[command(name = "crowdtrack", version, about = "Mixture-motion-model crowd tracking on ground-plane trajectories")]
struct Cli {
    #[command(flatten)]
    shared: Shared,
    #[command(subcommand)]
    command: Command,
}

/// Flags accepted by every command.
#[derive(Debug, Clone, Args)]
pub struct Shared {
    /// Master random seed (overrides the configuration file).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker thread cap.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Directory for output files; created when missing.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic scene: ground truth, observations, scenario, provenance.
    Synth(commands::synth::SynthArgs),
    /// Fit and select motion models on observed windows.
    Calibrate(commands::calibrate::CalibrateArgs),
    /// Track observations with the particle filter.
    Track(commands::track::TrackArgs),
    /// Score estimates against ground truth.
    Eval(commands::eval::EvalArgs),
    /// Mixture versus single forced models over a synthetic suite.
    Compare(commands::compare::CompareArgs),
    /// Throughput and optimizer benchmarks.
    Bench(commands::bench::BenchArgs),
}

/// Loads the configuration file (or defaults) and applies shared overrides.
pub fn load_config(shared: &Shared) -> Result<RunConfig, Failure> {
    let mut config = match &shared.config {
        Some(path) => RunConfig::load(path).map_err(Failure::usage)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = shared.seed {
        config.seed = seed;
    }
    if let Some(threads) = shared.threads {
        config.threads = Some(threads);
    }
    config.validate().map_err(Failure::usage)?;
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = load_config(&cli.shared).and_then(|config| {
        if let Some(n) = config.threads {
            // The global pool can only be built once; later builds are no-ops.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        match &cli.command {
            Command::Synth(a) => commands::synth::run(a, &cli.shared, &config),
            Command::Calibrate(a) => commands::calibrate::run(a, &cli.shared, &config),
            Command::Track(a) => commands::track::run(a, &cli.shared, &config),
            Command::Eval(a) => commands::eval::run(a, &cli.shared, &config),
            Command::Compare(a) => commands::compare::run(a, &cli.shared, &config),
            Command::Bench(a) => commands::bench::run(a, &cli.shared, &config),
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
