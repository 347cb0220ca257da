//! Head-to-head optimizer comparison on self-generated calibration windows.
//!
//! Every optimizer gets the same number of replay evaluations on the same
//! window, so the final replay errors are directly comparable.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::replay::{ReplayGoals, ReplayProblem};
use super::search::{Method, OptimizerSpec, SearchSpace};
use super::run_optimizer;
use crate::error::{Error, Result};
use crate::models::{AgentParams, ModelConstants, ModelKind};
use crate::rng::derive_seed;
use crate::state::StateHistory;
use crate::synthesis::{generate, sample_template_params, DensityClass, ScenarioTemplate, TemplateKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerBenchmark {
    pub models: Vec<ModelKind>,
    pub methods: Vec<Method>,
    pub seeds: u64,
    pub agents: usize,
    /// Window length in frames (k + 1).
    pub frames: usize,
    /// Replay evaluations granted to every optimizer run.
    pub evaluations: usize,
    /// Stagnation budget K handed to every optimizer.
    pub budget: usize,
    pub scope: TaskScope,
}

/// What one benchmark task optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskScope {
    /// Every agent's parameters at once against the joint replay.
    Joint,
    /// The most interacting agent's parameters against its conditional
    /// replay, the problem the tracker actually solves.
    #[default]
    Agent,
}

impl Default for OptimizerBenchmark {
    fn default() -> Self {
        Self {
            models: vec![ModelKind::Boids, ModelKind::Rvo],
            methods: vec![Method::Genetic, Method::SimulatedAnnealing, Method::Greedy],
            seeds: 10,
            agents: 6,
            frames: 21,
            evaluations: 600,
            budget: 600,
            scope: TaskScope::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerTrial {
    pub model: ModelKind,
    pub method: Method,
    pub seed: u64,
    pub error: f64,
    pub evaluations: usize,
}

/// Range and centre of one optimizer's final errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub min: f64,
    pub mean: f64,
    pub median: f64,
    pub max: f64,
    pub runs: usize,
}

impl ErrorSummary {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
        Some(Self { min: v[0], mean: v.iter().sum::<f64>() / n as f64, median, max: v[n - 1], runs: n })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerComparison {
    pub trials: Vec<OptimizerTrial>,
}

impl OptimizerComparison {
    /// Summary per (model, method); `None` as the model pools every model.
    pub fn summary(&self, model: Option<ModelKind>, method: Method) -> Option<ErrorSummary> {
        let values: Vec<f64> = self
            .trials
            .iter()
            .filter(|t| t.method == method && model.is_none_or(|m| t.model == m))
            .map(|t| t.error)
            .collect();
        ErrorSummary::of(&values)
    }

    pub fn models(&self) -> Vec<ModelKind> {
        let mut m: Vec<ModelKind> = self.trials.iter().map(|t| t.model).collect();
        m.sort();
        m.dedup();
        m
    }

    pub fn methods(&self) -> Vec<Method> {
        let mut out: Vec<Method> = Vec::new();
        for t in &self.trials {
            if !out.contains(&t.method) {
                out.push(t.method);
            }
        }
        out
    }

    /// `model,method,min,mean,median,max,runs`, one row per pair.
    pub fn write_table<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["model", "method", "min", "mean", "median", "max", "runs"])?;
        for model in self.models() {
            for method in self.methods() {
                if let Some(s) = self.summary(Some(model), method) {
                    w.write_record([
                        model.name().to_string(),
                        method.name().to_string(),
                        format!("{:.6}", s.min),
                        format!("{:.6}", s.mean),
                        format!("{:.6}", s.median),
                        format!("{:.6}", s.max),
                        s.runs.to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Fixed-width text rendering of [`write_table`](Self::write_table).
    pub fn render(&self) -> String {
        let mut out = format!("{:<14} {:<20} {:>10} {:>10} {:>10} {:>10}\n", "model", "method", "min", "mean", "median", "max");
        for model in self.models() {
            for method in self.methods() {
                if let Some(s) = self.summary(Some(model), method) {
                    out += &format!(
                        "{:<14} {:<20} {:>10.4} {:>10.4} {:>10.4} {:>10.4}\n",
                        model.name(),
                        method.name(),
                        s.min,
                        s.mean,
                        s.median,
                        s.max
                    );
                }
            }
        }
        out
    }
}

/// The calibration window of benchmark task `seed` for `model`: the last
/// `frames` frames of a self-generated scene, replayed toward scenario goals.
pub fn benchmark_task(bench: &OptimizerBenchmark, model: ModelKind, seed: u64, constants: &ModelConstants) -> Result<ReplayProblem> {
    let template = ScenarioTemplate::new(TemplateKind::ALL[seed as usize % 4], bench.agents, DensityClass::Medium, seed);
    let params = sample_template_params(&template, model, derive_seed(seed, &[0xB7, model as u64]));
    let generated = generate(&template, model, &params, bench.frames, constants)?;
    let mut window = StateHistory::new(bench.frames - 1, generated.scenario.dt)?;
    for s in generated.ground_truth.snapshots().into_values() {
        window.push(s)?;
    }
    ReplayProblem::with_goals(&window, &generated.scenario, constants, ReplayGoals::Scenario)
}

/// Runs every (model, seed, method) combination with an equal evaluation cap.
pub fn compare_optimizers(bench: &OptimizerBenchmark, constants: &ModelConstants) -> Result<OptimizerComparison> {
    if bench.frames < 2 || bench.agents == 0 || bench.evaluations == 0 {
        return Err(Error::InvalidInput("benchmark needs at least 2 frames, 1 agent and 1 evaluation".into()));
    }
    let jobs: Vec<(ModelKind, u64)> =
        bench.models.iter().flat_map(|&m| (0..bench.seeds).map(move |s| (m, s))).collect();
    let per_job: Vec<Result<Vec<OptimizerTrial>>> = jobs
        .par_iter()
        .map(|&(model, seed)| {
            let problem = benchmark_task(bench, model, seed, constants)?;
            let n = problem.agents().len();
            let context = vec![AgentParams::mean(model); n];
            let conditional = problem.conditional(model, &context);
            // The agent that constant velocity explains worst.
            let lin = problem.conditional(ModelKind::Lin, &context).errors(&context);
            let focus = (0..n).max_by(|&a, &b| lin[a].total_cmp(&lin[b]).then(b.cmp(&a))).unwrap_or(0);
            let space = match bench.scope {
                TaskScope::Joint => SearchSpace::for_model(model, n),
                TaskScope::Agent => SearchSpace::for_model(model, 1),
            };
            let cost = |x: &[f64]| match bench.scope {
                TaskScope::Joint => problem.error_flat(model, x),
                TaskScope::Agent => conditional.agent_error(focus, &AgentParams::from_slice(model, x)),
            };
            Ok(bench
                .methods
                .iter()
                .map(|&method| {
                    let spec = OptimizerSpec {
                        max_evaluations: Some(bench.evaluations),
                        ..OptimizerSpec::new(method, bench.budget, derive_seed(seed, &[0x0B, model as u64]))
                    };
                    let best = run_optimizer(&cost, &space, &spec, &[]);
                    OptimizerTrial { model, method, seed, error: best.cost, evaluations: best.evaluations }
                })
                .collect())
        })
        .collect();
    let mut trials = Vec::new();
    for t in per_job {
        trials.extend(t?);
    }
    Ok(OptimizerComparison { trials })
}

/// Medians per method across all tasks, in `methods` order.
pub fn median_by_method(cmp: &OptimizerComparison) -> BTreeMap<&'static str, f64> {
    cmp.methods().into_iter().filter_map(|m| cmp.summary(None, m).map(|s| (m.name(), s.median))).collect()
}
