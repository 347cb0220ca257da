use std::collections::BTreeMap;

use clap::Args;

use crowdtrack::config::RunConfig;
use crowdtrack::evaluation::evaluate;
use crowdtrack::models::ModelKind;
use crowdtrack::rng::derive_seed;
use crowdtrack::synthesis::{DensityClass, TrackingSuite};
use crowdtrack::tracking::track;

use crate::fail::Failure;
use crate::files::OutDir;
use crate::svg;
use crate::Shared;

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Model generating the synthetic ground truth.
    #[arg(long, default_value = "rvo")]
    pub model: ModelKind,
    /// Scenes per density class.
    #[arg(long, default_value_t = 3)]
    pub seeds: u64,
    #[arg(long, value_delimiter = ',', default_values = ["low", "medium", "high"])]
    pub densities: Vec<DensityClass>,
    #[arg(long, default_value_t = 20)]
    pub agents: usize,
    #[arg(long)]
    pub frames: Option<usize>,
}

/// Method columns: the calibrated mixture, then every model forced alone.
fn methods() -> Vec<(&'static str, Option<ModelKind>)> {
    let mut m = vec![("mixture", None)];
    m.extend(ModelKind::ALL.iter().map(|&k| (k.name(), Some(k))));
    m
}

struct Cell {
    successful: usize,
    total: usize,
    switches: usize,
    rms: f64,
}

pub fn run(args: &CompareArgs, shared: &Shared, config: &RunConfig) -> Result<(), Failure> {
    if args.seeds == 0 || args.agents == 0 || args.densities.is_empty() {
        return Err(Failure::usage("--seeds, --agents and --densities must be non-empty"));
    }
    let methods = methods();
    let mut densities = args.densities.clone();
    densities.dedup();
    let mut rows: Vec<(DensityClass, u64, Vec<Cell>)> = Vec::new();
    for &density in &densities {
        let suite = TrackingSuite {
            model: args.model,
            agents: args.agents,
            density,
            frames: args.frames.unwrap_or(config.synth.frames),
            observation_sigma: config.synth.observation_sigma,
            dropout: config.synth.dropout,
            occlusion: config.synth.occlusion.clone(),
            template: None,
        };
        for s in 0..args.seeds {
            let case = suite.case(derive_seed(config.seed, &[density as u64, s]), &config.constants)?;
            let mut cells = Vec::with_capacity(methods.len());
            for &(_, forced) in &methods {
                let mut tracker = config.tracker();
                tracker.forced_model = forced;
                let output = track(&case.observations, &case.generated.scenario, &tracker)?;
                let report = evaluate(&case.generated.ground_truth, &output.estimates, &config.matching)?;
                cells.push(Cell {
                    successful: report.successful_tracks,
                    total: report.total_tracks,
                    switches: report.id_switches,
                    rms: report.rms_error,
                });
            }
            eprintln!("{} seed {s}: done", density.name());
            rows.push((density, s, cells));
        }
    }

    let out = OutDir::create(&shared.out_dir)?;
    let names: Vec<String> = methods.iter().map(|m| m.0.to_string()).collect();

    out.with_writer("table.csv", |w| {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["density", "seed", "method", "successful_tracks", "total_tracks", "id_switches", "rms_error"])?;
        for (density, seed, cells) in &rows {
            for (name, c) in names.iter().zip(cells) {
                w.write_record([
                    density.name().to_string(),
                    seed.to_string(),
                    name.clone(),
                    c.successful.to_string(),
                    c.total.to_string(),
                    c.switches.to_string(),
                    format!("{:.6}", c.rms),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    })?;

    let mut md = format!("| density | seed | {} |\n", names.join(" | "));
    md += &format!("|---|---|{}\n", "---|".repeat(names.len()));
    for (density, seed, cells) in &rows {
        let body: Vec<String> = cells.iter().map(|c| format!("{}/{} ST, {} IS", c.successful, c.total, c.switches)).collect();
        md += &format!("| {} | {seed} | {} |\n", density.name(), body.join(" | "));
    }
    out.text("table.md", &md)?;

    // Mean RMS per density and method, the plotted quantity.
    let mut rms: BTreeMap<(DensityClass, usize), Vec<f64>> = BTreeMap::new();
    for (density, _, cells) in &rows {
        for (m, c) in cells.iter().enumerate() {
            rms.entry((*density, m)).or_default().push(c.rms);
        }
    }
    let mean = |d: DensityClass, m: usize| {
        let v = &rms[&(d, m)];
        v.iter().sum::<f64>() / v.len() as f64
    };
    out.with_writer("rms.csv", |w| {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["density", "method", "rms"])?;
        for &d in &densities {
            for (m, name) in names.iter().enumerate() {
                w.write_record([d.name(), name, &format!("{:.6}", mean(d, m))])?;
            }
        }
        w.flush()?;
        Ok(())
    })?;
    let groups: Vec<String> = densities.iter().map(|d| d.name().to_string()).collect();
    let values: Vec<Vec<f64>> = densities.iter().map(|&d| (0..names.len()).map(|m| mean(d, m)).collect()).collect();
    let title = format!("RMS position error, {} ground truth", args.model);
    out.text("rms.svg", &svg::grouped_bars(&title, "RMS error (m)", &groups, &names, &values))?;

    print!("{md}");
    Ok(())
}
