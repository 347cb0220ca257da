use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::Serialize;

use crowdtrack::calibration::{SelectionMode, WindowReport};
use crowdtrack::config::RunConfig;
use crowdtrack::dataset::SourceTag;
use crowdtrack::models::ModelKind;
use crowdtrack::tracking::{track, TrackStats};

use crate::fail::Failure;
use crate::files::{read_provenance, read_scenario, read_trajectories, OutDir};
use crate::Shared;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Args)]
pub struct TrackArgs {
    #[arg(long)]
    pub observations: PathBuf,
    #[arg(long)]
    pub scenario: PathBuf,
    /// Track with the generating model and parameters instead of calibrating.
    #[arg(long, conflicts_with = "forced_model")]
    pub provenance: Option<PathBuf>,
    /// Use a single motion model for every agent.
    #[arg(long)]
    pub forced_model: Option<ModelKind>,
    /// Confidence-driven particle counts.
    #[arg(long, value_enum)]
    pub adaptive: Option<Switch>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub recalibrate_every: Option<usize>,
    /// global or per-agent.
    #[arg(long)]
    pub mode: Option<SelectionMode>,
}

/// Deterministic run summary; timings go to `timing.json`.
#[derive(Serialize)]
struct Summary {
    frames_tracked: usize,
    agents: usize,
    estimates: usize,
    mean_particles: f64,
    model_frequencies: BTreeMap<ModelKind, usize>,
    calibrations: usize,
    stats: TrackStats,
}

#[derive(Serialize)]
struct Timing {
    wall_time: f64,
    calibration_time: f64,
    steps_per_second: f64,
}

pub fn run(args: &TrackArgs, shared: &Shared, config: &RunConfig) -> Result<(), Failure> {
    let mut config = config.clone();
    if let Some(k) = args.k {
        config.k = k;
    }
    if let Some(r) = args.recalibrate_every {
        config.recalibrate_every = r;
    }
    if let Some(m) = args.mode {
        config.mode = m;
    }
    if let Some(kind) = args.forced_model {
        config.forced_model = Some(kind);
    }
    if let Some(a) = args.adaptive {
        config.particles.adaptive = a == Switch::On;
    }
    config.validate().map_err(Failure::usage)?;
    let mut tracker = config.tracker();

    let scenario = read_scenario(&args.scenario)?;
    let observations = read_trajectories(&args.observations, scenario.dt, SourceTag::Observation)?;
    if let Some(path) = &args.provenance {
        let provenance = read_provenance(path)?;
        tracker.known_params = Some(provenance.params);
    }

    let output = track(&observations, &scenario, &tracker)?;
    let out = OutDir::create(&shared.out_dir)?;
    out.trajectories("estimates.csv", &output.estimates)?;
    out.with_writer("diagnostics.csv", |w| output.write_diagnostics_csv(w))?;
    let reports: Vec<WindowReport> = output.calibrations.iter().map(|c| c.result.report(c.frame)).collect();
    out.json("calibration.json", &reports)?;
    let summary = Summary {
        frames_tracked: output.stats.frames_tracked,
        agents: output.estimates.agents().len(),
        estimates: output.estimates.records.len(),
        mean_particles: output.mean_particles(),
        model_frequencies: output.model_frequencies(),
        calibrations: output.calibrations.len(),
        stats: output.stats.clone(),
    };
    out.json("summary.json", &summary)?;
    out.json(
        "timing.json",
        &Timing {
            wall_time: output.wall_time,
            calibration_time: output.calibration_time,
            steps_per_second: output.steps_per_second(),
        },
    )?;

    println!("tracked {} frames at {:.1} steps/s", summary.frames_tracked, output.steps_per_second());
    println!("mean particles per agent: {:.1}", summary.mean_particles);
    let total: usize = summary.model_frequencies.values().sum();
    for (model, n) in &summary.model_frequencies {
        println!("  {:<13} {:>6.1}%", model.name(), 100.0 * *n as f64 / total.max(1) as f64);
    }
    Ok(())
}
