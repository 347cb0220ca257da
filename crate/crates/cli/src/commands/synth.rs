use clap::Args;

use crowdtrack::config::RunConfig;
use crowdtrack::models::ModelKind;
use crowdtrack::synthesis::{DensityClass, TemplateKind, TrackingSuite};

use crate::fail::Failure;
use crate::files::OutDir;
use crate::Shared;

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Scene template: crossing, head_on_corridor, circle_swap, random_goals.
    #[arg(long, default_value = "circle_swap")]
    pub kind: TemplateKind,
    /// Generating motion model.
    #[arg(long, default_value = "rvo")]
    pub model: ModelKind,
    #[arg(long, default_value_t = 20)]
    pub agents: usize,
    /// Density class: low, medium, high (default from the configuration).
    #[arg(long)]
    pub density: Option<DensityClass>,
    #[arg(long)]
    pub frames: Option<usize>,
    /// Observation noise standard deviation in meters.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Per-observation dropout probability.
    #[arg(long)]
    pub dropout: Option<f64>,
}

pub fn run(args: &SynthArgs, shared: &Shared, config: &RunConfig) -> Result<(), Failure> {
    let s = &config.synth;
    let suite = TrackingSuite {
        model: args.model,
        agents: args.agents,
        density: args.density.unwrap_or(s.density),
        frames: args.frames.unwrap_or(s.frames),
        observation_sigma: args.sigma.unwrap_or(s.observation_sigma),
        dropout: args.dropout.unwrap_or(s.dropout),
        occlusion: s.occlusion.clone(),
        template: Some(args.kind),
    };
    if suite.agents == 0 {
        return Err(Failure::usage("--agents must be at least 1"));
    }
    if suite.frames < 2 {
        return Err(Failure::usage("--frames must be at least 2"));
    }
    if !(suite.observation_sigma >= 0.0 && suite.observation_sigma.is_finite()) {
        return Err(Failure::usage("--sigma must be a non-negative number"));
    }
    if !(0.0..1.0).contains(&suite.dropout) {
        return Err(Failure::usage("--dropout must be in [0, 1)"));
    }
    let case = suite.case(config.seed, &config.constants)?;
    let out = OutDir::create(&shared.out_dir)?;
    out.trajectories("ground_truth.csv", &case.generated.ground_truth)?;
    out.trajectories("observations.csv", &case.observations)?;
    out.scenario("scenario.json", &case.generated.scenario)?;
    out.json("provenance.json", &case.generated.provenance)?;
    println!(
        "synthesized {} agents x {} frames ({} on {}) into {}",
        suite.agents,
        suite.frames,
        args.model,
        args.kind.name(),
        shared.out_dir.display()
    );
    Ok(())
}
