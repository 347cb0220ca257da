use clap::Args;
use serde::Serialize;

use crowdtrack::calibration::{compare_optimizers, OptimizerBenchmark, OptimizerTrial};
use crowdtrack::config::RunConfig;
use crowdtrack::synthesis::TrackingSuite;
use crowdtrack::tracking::track;

use crate::fail::Failure;
use crate::files::OutDir;
use crate::Shared;

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Scenes in the tracking throughput run.
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    #[arg(long, default_value_t = 50)]
    pub agents: usize,
    #[arg(long, default_value_t = 200)]
    pub frames: usize,
    /// Calibration windows per model in the optimizer comparison.
    #[arg(long, default_value_t = 10)]
    pub optimizer_seeds: u64,
    /// Replay evaluations granted to every optimizer run.
    #[arg(long, default_value_t = 600)]
    pub evaluations: usize,
    #[arg(long)]
    pub skip_tracking: bool,
    #[arg(long)]
    pub skip_optimizers: bool,
}

#[derive(Serialize)]
struct ThroughputRun {
    seed: u64,
    agents: usize,
    frames_tracked: usize,
    mean_particles: f64,
    wall_time: f64,
    calibration_time: f64,
    steps_per_second: f64,
}

pub fn run(args: &BenchArgs, shared: &Shared, config: &RunConfig) -> Result<(), Failure> {
    if args.agents == 0 || args.frames < 2 || args.evaluations == 0 {
        return Err(Failure::usage("--agents, --evaluations must be positive and --frames at least 2"));
    }
    let out = OutDir::create(&shared.out_dir)?;

    if !args.skip_tracking {
        let suite = TrackingSuite { agents: args.agents, frames: args.frames, ..Default::default() };
        let mut runs = Vec::new();
        for s in 0..args.seeds {
            let seed = config.seed.wrapping_add(s);
            let case = suite.case(seed, &config.constants)?;
            let output = track(&case.observations, &case.generated.scenario, &config.tracker())?;
            let run = ThroughputRun {
                seed,
                agents: args.agents,
                frames_tracked: output.stats.frames_tracked,
                mean_particles: output.mean_particles(),
                wall_time: output.wall_time,
                calibration_time: output.calibration_time,
                steps_per_second: output.steps_per_second(),
            };
            println!(
                "seed {seed}: {:.1} steps/s with {} agents ({:.1} particles per agent)",
                run.steps_per_second, run.agents, run.mean_particles
            );
            runs.push(run);
        }
        out.json("throughput.json", &runs)?;
    }

    if !args.skip_optimizers {
        // Equal evaluation caps; the stagnation budget is set as large so that
        // every optimizer spends its full allowance.
        let bench = OptimizerBenchmark {
            seeds: args.optimizer_seeds,
            evaluations: args.evaluations,
            budget: args.evaluations,
            ..Default::default()
        };
        let comparison = compare_optimizers(&bench, &config.constants)?;
        out.with_writer("optimizers.csv", |w| comparison.write_table(w))?;
        let trials: &[OptimizerTrial] = &comparison.trials;
        out.json("optimizer_trials.json", trials)?;
        print!("{}", comparison.render());
    }
    Ok(())
}
