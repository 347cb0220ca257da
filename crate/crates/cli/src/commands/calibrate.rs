use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use serde::Serialize;

use crowdtrack::calibration::{calibrate, CalibrationResult, SelectionMode, WindowReport};
use crowdtrack::config::RunConfig;
use crowdtrack::dataset::SourceTag;
use crowdtrack::models::ModelKind;
use crowdtrack::{Snapshot, StateHistory};

use crate::fail::Failure;
use crate::files::{read_scenario, read_trajectories, OutDir};
use crate::Shared;

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub observations: PathBuf,
    #[arg(long)]
    pub scenario: PathBuf,
    /// Newest frame of the window (default: the last observed frame).
    #[arg(long, conflicts_with = "all_windows")]
    pub frame: Option<u64>,
    /// Calibrate every `recalibrate_every` frames across the whole file.
    #[arg(long)]
    pub all_windows: bool,
    /// Window length k (past states besides the newest).
    #[arg(long)]
    pub k: Option<usize>,
    /// global or per-agent.
    #[arg(long)]
    pub mode: Option<SelectionMode>,
    /// Restricts the candidates to a single model.
    #[arg(long)]
    pub forced_model: Option<ModelKind>,
}

#[derive(Serialize)]
struct Timing {
    frame: u64,
    seconds: f64,
}

pub fn run(args: &CalibrateArgs, shared: &Shared, config: &RunConfig) -> Result<(), Failure> {
    let mut config = config.clone();
    if let Some(k) = args.k {
        config.k = k;
    }
    if let Some(m) = args.mode {
        config.mode = m;
    }
    config.validate().map_err(Failure::usage)?;
    let scenario = read_scenario(&args.scenario)?;
    let observations = read_trajectories(&args.observations, scenario.dt, SourceTag::Observation)?;
    let snapshots = observations.snapshots();
    let (f0, f1) = observations.frame_range().ok_or_else(|| Failure::data("no observations"))?;
    let k = config.k as u64;
    if f1 - f0 < k {
        return Err(Failure::data(format!("a window needs {} frames, the file has {}", k + 1, f1 - f0 + 1)));
    }
    let ends: Vec<u64> = if args.all_windows {
        (f0 + k..=f1).step_by(config.recalibrate_every).collect()
    } else {
        let end = args.frame.unwrap_or(f1);
        if end < f0 + k || end > f1 {
            return Err(Failure::usage(format!("--frame must lie in [{}, {f1}]", f0 + k)));
        }
        vec![end]
    };

    let mut settings = config.calibration();
    if let Some(kind) = args.forced_model {
        settings.models = vec![kind];
    }
    let mut reports: Vec<WindowReport> = Vec::new();
    let mut timings = Vec::new();
    let mut previous: Option<CalibrationResult> = None;
    for &end in &ends {
        let mut window = StateHistory::new(config.k, scenario.dt)?;
        for f in end - k..=end {
            let snap = snapshots.get(&f).cloned().unwrap_or_else(|| Snapshot::new(f, Default::default()));
            window.push(snap)?;
        }
        let started = Instant::now();
        let result = calibrate(&window, &scenario, &settings, &config.constants, previous.as_ref())?;
        timings.push(Timing { frame: end, seconds: started.elapsed().as_secs_f64() });
        let report = result.report(end);
        println!(
            "frame {end}: best {} ({})",
            report.best_kind,
            report.per_model_error.iter().map(|(m, e)| format!("{m} {e:.4}")).collect::<Vec<_>>().join(", ")
        );
        reports.push(report);
        previous = Some(result);
    }

    let out = OutDir::create(&shared.out_dir)?;
    out.json("calibration.json", &reports)?;
    out.json("timing.json", &timings)?;
    Ok(())
}
