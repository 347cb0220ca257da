use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;

use crowdtrack::config::RunConfig;
use crowdtrack::dataset::SourceTag;
use crowdtrack::evaluation::{evaluate, EvalReport, MatchConfig};

use crate::fail::Failure;
use crate::files::{read_trajectories, OutDir};
use crate::Shared;

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("input").required(true).args(["ground_truth", "batch"]))]
pub struct EvalArgs {
    #[arg(long, requires = "estimates")]
    pub ground_truth: Option<PathBuf>,
    #[arg(long, requires = "ground_truth")]
    pub estimates: Option<PathBuf>,
    /// Run directories, each holding `ground_truth.csv` and `estimates.csv`;
    /// reports one row per directory.
    #[arg(long, num_args = 1.., conflicts_with_all = ["ground_truth", "estimates"])]
    pub batch: Vec<PathBuf>,
    /// Matching radius in meters (overrides the configuration).
    #[arg(long)]
    pub match_radius: Option<f64>,
}

#[derive(Serialize)]
struct RunRow<'a> {
    run: String,
    #[serde(flatten)]
    report: &'a EvalReport,
}

fn score(gt: &Path, est: &Path, cfg: &MatchConfig, dt: f64) -> Result<EvalReport, Failure> {
    let gt = read_trajectories(gt, dt, SourceTag::GroundTruth)?;
    let est = read_trajectories(est, dt, SourceTag::Estimate)?;
    Ok(evaluate(&gt, &est, cfg)?)
}

pub fn run(args: &EvalArgs, shared: &Shared, config: &RunConfig) -> Result<(), Failure> {
    let mut cfg = config.matching;
    if let Some(r) = args.match_radius {
        cfg.match_radius = r;
    }
    cfg.validate().map_err(Failure::usage)?;
    // Scores depend on positions only, so any positive frame rate will do.
    let dt = crowdtrack::synthesis::DEFAULT_DT;
    let out = OutDir::create(&shared.out_dir)?;

    if let (Some(gt), Some(est)) = (&args.ground_truth, &args.estimates) {
        let report = score(gt, est, &cfg, dt)?;
        out.json("report.json", &report)?;
        out.with_writer("report.csv", |w| report.write_csv(w, true))?;
        println!(
            "MOTA {:.4}  MOTP {:.4}  ST {}/{}  IS {}  RMS {:.4}",
            report.mota, report.motp, report.successful_tracks, report.total_tracks, report.id_switches, report.rms_error
        );
        return Ok(());
    }

    let mut rows = Vec::new();
    for dir in &args.batch {
        let report = score(&dir.join("ground_truth.csv"), &dir.join("estimates.csv"), &cfg, dt)?;
        let run = dir.file_name().map_or_else(|| dir.display().to_string(), |n| n.to_string_lossy().into_owned());
        rows.push((run, report));
    }
    let table: Vec<RunRow> = rows.iter().map(|(run, report)| RunRow { run: run.clone(), report }).collect();
    out.json("report.json", &table)?;
    out.with_writer("report.csv", |w| {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(std::iter::once("run").chain(EvalReport::KEYS))?;
        for row in &table {
            let fields = serde_json::to_value(row.report)?;
            let cells = EvalReport::KEYS.iter().map(|k| fields[*k].to_string());
            w.write_record(std::iter::once(row.run.clone()).chain(cells))?;
        }
        w.flush()?;
        Ok(())
    })?;
    println!("scored {} runs", table.len());
    Ok(())
}
