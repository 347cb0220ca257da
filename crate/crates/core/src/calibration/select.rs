//! Per-model parameter fitting, best-model selection and one-step prediction.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::replay::{ReplayGoals, ReplayProblem, ReplayScheme};
use super::run_optimizer;
use super::search::{OptimizerSpec, SearchSpace};
use crate::error::{Error, Result};
use crate::geometry::{Segment, Vec2};
use crate::models::{advance_agent, AgentParams, CrowdView, ModelConstants, ModelKind, ModelParams};
use crate::rng::derive_seed;
use crate::scenario::Scenario;
use crate::state::{AgentId, AgentState, StateHistory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionMode {
    /// One model for all agents (argmin of the summed error).
    Global,
    /// Each agent gets the model that minimizes its own error contribution.
    #[default]
    PerAgent,
}

impl std::str::FromStr for SelectionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(Self::Global),
            "per-agent" | "per_agent" | "peragent" => Ok(Self::PerAgent),
            other => Err(Error::InvalidInput(format!("unknown selection mode `{other}`"))),
        }
    }
}

/// Best parameters found for one model on one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFit {
    pub kind: ModelKind,
    pub params: ModelParams,
    pub error: f64,
    pub per_agent_error: BTreeMap<AgentId, f64>,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub mode: SelectionMode,
    /// Model with the lowest summed error.
    pub best_kind: ModelKind,
    pub best_params: ModelParams,
    /// Model used for each agent. Equal to `best_kind` everywhere in global mode.
    pub agent_models: BTreeMap<AgentId, ModelKind>,
    pub per_model_error: BTreeMap<ModelKind, f64>,
    pub fits: BTreeMap<ModelKind, ModelFit>,
    pub evaluations_used: usize,
    /// Seconds spent fitting; excluded from equality.
    pub wall_time: f64,
}

impl PartialEq for CalibrationResult {
    fn eq(&self, other: &Self) -> bool {
        self.mode == other.mode
            && self.best_kind == other.best_kind
            && self.best_params == other.best_params
            && self.agent_models == other.agent_models
            && self.per_model_error == other.per_model_error
            && self.fits == other.fits
            && self.evaluations_used == other.evaluations_used
    }
}

impl CalibrationResult {
    /// A result with no fits: every agent steps with constant velocity.
    pub fn constant_velocity() -> Self {
        Self {
            mode: SelectionMode::Global,
            best_kind: ModelKind::Lin,
            best_params: ModelParams::new(ModelKind::Lin),
            agent_models: BTreeMap::new(),
            per_model_error: BTreeMap::new(),
            fits: BTreeMap::new(),
            evaluations_used: 0,
            wall_time: 0.0,
        }
    }

    /// A result that assigns known parameters to their agents without fitting.
    pub fn fixed(params: ModelParams) -> Self {
        let kind = params.kind;
        let agent_models = params.agents.keys().map(|&id| (id, kind)).collect();
        let per_agent_error = params.agents.keys().map(|&id| (id, 0.0)).collect();
        let fit = ModelFit { kind, params: params.clone(), error: 0.0, per_agent_error, evaluations: 0 };
        Self {
            mode: SelectionMode::Global,
            best_kind: kind,
            best_params: params,
            agent_models,
            per_model_error: BTreeMap::from([(kind, 0.0)]),
            fits: BTreeMap::from([(kind, fit)]),
            evaluations_used: 0,
            wall_time: 0.0,
        }
    }

    pub fn model_of(&self, id: AgentId) -> ModelKind {
        self.agent_models.get(&id).copied().unwrap_or(ModelKind::Lin)
    }

    /// Parameters of agent `id` under model `kind`, if fitted.
    pub fn params_of(&self, kind: ModelKind, id: AgentId) -> Option<&AgentParams> {
        self.fits.get(&kind).and_then(|f| f.params.get(id))
    }
}

/// Deterministic summary of one calibrated window; wall time is reported
/// separately so that reports of identical runs are byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowReport {
    /// Newest frame of the window.
    pub frame: u64,
    pub mode: SelectionMode,
    pub best_kind: ModelKind,
    pub agent_models: BTreeMap<AgentId, ModelKind>,
    pub per_model_error: BTreeMap<ModelKind, f64>,
    pub params: BTreeMap<ModelKind, ModelParams>,
    pub evaluations: usize,
}

impl CalibrationResult {
    pub fn report(&self, frame: u64) -> WindowReport {
        WindowReport {
            frame,
            mode: self.mode,
            best_kind: self.best_kind,
            agent_models: self.agent_models.clone(),
            per_model_error: self.per_model_error.clone(),
            params: self.fits.iter().map(|(k, f)| (*k, f.params.clone())).collect(),
            evaluations: self.evaluations_used,
        }
    }
}

/// How to calibrate a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationSettings {
    pub optimizer: OptimizerSpec,
    pub mode: SelectionMode,
    /// Candidate models; a single entry forces that model.
    pub models: Vec<ModelKind>,
    /// Errors closer than this are ties, resolved toward the cheaper model.
    pub tie_tolerance: f64,
    pub replay_goals: ReplayGoals,
    pub replay_scheme: ReplayScheme,
    /// Fitting rounds of the conditional scheme; later rounds give the
    /// neighbors the previous round's parameters.
    pub context_rounds: usize,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        Self {
            optimizer: OptimizerSpec::default(),
            mode: SelectionMode::PerAgent,
            models: ModelKind::ALL.to_vec(),
            tie_tolerance: 1e-9,
            replay_goals: ReplayGoals::Scenario,
            replay_scheme: ReplayScheme::Conditional,
            context_rounds: 2,
        }
    }
}

/// Fits `kind` to the window with the default replay settings. The
/// table-mean parameters always seed the search; `warm` (typically the
/// previous window's optimum) adds a second seed.
pub fn optimize_params(
    kind: ModelKind,
    window: &StateHistory,
    scenario: &Scenario,
    spec: &OptimizerSpec,
    constants: &ModelConstants,
    warm: Option<&ModelParams>,
) -> Result<ModelFit> {
    spec.validate()?;
    let settings = CalibrationSettings::default();
    let problem = ReplayProblem::with_goals(window, scenario, constants, settings.replay_goals)?;
    Ok(fit_problem(&problem, kind, spec, settings.replay_scheme, settings.context_rounds, warm))
}

fn fit_problem(
    problem: &ReplayProblem,
    kind: ModelKind,
    spec: &OptimizerSpec,
    scheme: ReplayScheme,
    rounds: usize,
    warm: Option<&ModelParams>,
) -> ModelFit {
    let ids = problem.agents();
    if kind == ModelKind::Lin || ids.is_empty() {
        let dense = vec![AgentParams::mean(kind); ids.len()];
        let per = problem.per_agent_errors(kind, &dense);
        let params = if kind == ModelKind::Lin { ModelParams::new(kind) } else { ModelParams::mean(kind, ids.iter().copied()) };
        return ModelFit {
            kind,
            params,
            error: per.iter().sum(),
            per_agent_error: ids.iter().copied().zip(per).collect(),
            evaluations: 0,
        };
    }
    let warm = warm.filter(|w| w.kind == kind);
    match scheme {
        ReplayScheme::Joint => fit_joint(problem, kind, spec, warm),
        ReplayScheme::Conditional => fit_conditional(problem, kind, spec, rounds, warm),
    }
}

fn fit_joint(problem: &ReplayProblem, kind: ModelKind, spec: &OptimizerSpec, warm: Option<&ModelParams>) -> ModelFit {
    let ids = problem.agents();
    let space = SearchSpace::for_model(kind, ids.len());
    let mut seeds = Vec::new();
    if let Some(w) = warm {
        let flat: Vec<f64> = ids
            .iter()
            .flat_map(|id| w.get(*id).copied().unwrap_or_else(|| AgentParams::mean(kind)).to_vec(kind))
            .collect();
        seeds.push(flat);
    }
    let kind_spec = OptimizerSpec { seed: derive_seed(spec.seed, &[kind as u64]), ..spec.clone() };
    let cost = |x: &[f64]| problem.error_flat(kind, x);
    let optimum = run_optimizer(&cost, &space, &kind_spec, &seeds);
    let dense = problem.dense_params(kind, &optimum.params);
    let per = problem.per_agent_errors(kind, &dense);
    ModelFit {
        kind,
        params: ModelParams::from_flat(kind, ids, &optimum.params),
        error: optimum.cost,
        per_agent_error: ids.iter().copied().zip(per).collect(),
        evaluations: optimum.evaluations,
    }
}

/// One optimizer run per agent. Neighbors use the table-mean parameters in
/// the first round and the previous round's fits afterwards.
fn fit_conditional(
    problem: &ReplayProblem,
    kind: ModelKind,
    spec: &OptimizerSpec,
    rounds: usize,
    warm: Option<&ModelParams>,
) -> ModelFit {
    let ids = problem.agents();
    let mut context = vec![AgentParams::mean(kind); ids.len()];
    let mut seeds: Vec<Option<AgentParams>> = ids.iter().map(|id| warm.and_then(|w| w.get(*id)).copied()).collect();
    let space = SearchSpace::for_model(kind, 1);
    let mut evaluations = 0;
    let mut fits: Vec<(AgentParams, f64)> = Vec::new();
    for round in 0..rounds.max(1) {
        let replay = problem.conditional(kind, &context);
        let results: Vec<(AgentParams, f64, usize)> = (0..ids.len())
            .into_par_iter()
            .map(|i| {
                let id = ids[i];
                let seed_points: Vec<Vec<f64>> = seeds[i].iter().map(|p| p.to_vec(kind)).collect();
                let agent_spec =
                    OptimizerSpec { seed: derive_seed(spec.seed, &[kind as u64, id as u64, round as u64]), ..spec.clone() };
                let cost = |x: &[f64]| replay.agent_error(i, &AgentParams::from_slice(kind, x));
                let o = run_optimizer(&cost, &space, &agent_spec, &seed_points);
                (AgentParams::from_slice(kind, &o.params), o.cost, o.evaluations)
            })
            .collect();
        evaluations += results.iter().map(|r| r.2).sum::<usize>();
        fits = results.iter().map(|r| (r.0, r.1)).collect();
        context = fits.iter().map(|f| f.0).collect();
        seeds = context.iter().copied().map(Some).collect();
    }
    ModelFit {
        kind,
        params: ModelParams { kind, agents: ids.iter().copied().zip(fits.iter().map(|f| f.0)).collect() },
        error: fits.iter().map(|f| f.1).sum(),
        per_agent_error: ids.iter().copied().zip(fits.iter().map(|f| f.1)).collect(),
        evaluations,
    }
}

/// Fits every candidate model (in parallel) and selects the best.
pub fn calibrate(
    window: &StateHistory,
    scenario: &Scenario,
    settings: &CalibrationSettings,
    constants: &ModelConstants,
    previous: Option<&CalibrationResult>,
) -> Result<CalibrationResult> {
    settings.optimizer.validate()?;
    if settings.models.is_empty() {
        return Err(Error::InvalidInput("no candidate models".into()));
    }
    let started = Instant::now();
    let problem = ReplayProblem::with_goals(window, scenario, constants, settings.replay_goals)?;
    let mut kinds = settings.models.clone();
    kinds.sort();
    kinds.dedup();
    let fits: Vec<ModelFit> = kinds
        .par_iter()
        .map(|&kind| {
            let warm = previous.and_then(|p| p.fits.get(&kind)).map(|f| &f.params);
            fit_problem(&problem, kind, &settings.optimizer, settings.replay_scheme, settings.context_rounds, warm)
        })
        .collect();
    let mut result = select_from_fits(fits, settings.mode, settings.tie_tolerance);
    result.wall_time = started.elapsed().as_secs_f64();
    Ok(result)
}

/// Runs every model's optimization and picks the best model(s).
pub fn select_model(
    window: &StateHistory,
    scenario: &Scenario,
    spec: &OptimizerSpec,
    mode: SelectionMode,
    constants: &ModelConstants,
) -> Result<CalibrationResult> {
    let settings = CalibrationSettings { optimizer: spec.clone(), mode, ..Default::default() };
    calibrate(window, scenario, &settings, constants, None)
}

/// Selection over finished fits. Ties within `tolerance` go to the model
/// that comes first in [`ModelKind`] order.
pub fn select_from_fits(fits: Vec<ModelFit>, mode: SelectionMode, tolerance: f64) -> CalibrationResult {
    let mut fits: Vec<ModelFit> = fits;
    fits.sort_by_key(|f| f.kind);
    let best = fits
        .iter()
        .fold(None::<&ModelFit>, |acc, f| match acc {
            Some(b) if f.error >= b.error - tolerance => Some(b),
            _ => Some(f),
        })
        .expect("at least one fit");
    let (best_kind, best_params) = (best.kind, best.params.clone());

    let agents: Vec<AgentId> = fits[0].per_agent_error.keys().copied().collect();
    let agent_models = agents
        .iter()
        .map(|&id| {
            let kind = match mode {
                SelectionMode::Global => best_kind,
                SelectionMode::PerAgent => {
                    let mut choice = (fits[0].kind, fits[0].per_agent_error[&id]);
                    for f in &fits[1..] {
                        let e = f.per_agent_error[&id];
                        if e < choice.1 - tolerance {
                            choice = (f.kind, e);
                        }
                    }
                    choice.0
                }
            };
            (id, kind)
        })
        .collect();
    CalibrationResult {
        mode,
        best_kind,
        best_params,
        agent_models,
        per_model_error: fits.iter().map(|f| (f.kind, f.error)).collect(),
        evaluations_used: fits.iter().map(|f| f.evaluations).sum(),
        fits: fits.into_iter().map(|f| (f.kind, f)).collect(),
        wall_time: 0.0,
    }
}

/// Where goals come from when predicting the next frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GoalSource {
    /// The scenario's goal, or the extrapolated one when it has none.
    #[default]
    Scenario,
    /// 2 s ahead along the agent's current velocity.
    Extrapolate,
}

/// Seconds of extrapolation used for live goals.
pub const GOAL_HORIZON: f64 = 2.0;

/// Owned, index-addressed inputs for a mixed-model prediction step.
pub struct PreparedCrowd {
    pub ids: Vec<AgentId>,
    pub states: Vec<AgentState>,
    pub goals: Vec<Vec2>,
    pub kinds: Vec<ModelKind>,
    params: BTreeMap<ModelKind, Vec<AgentParams>>,
    obstacles: Vec<Segment>,
    dt: f64,
    constants: ModelConstants,
}

impl PreparedCrowd {
    /// Agents without a fitted model step with constant velocity.
    pub fn new(
        result: &CalibrationResult,
        current: &BTreeMap<AgentId, AgentState>,
        scenario: &Scenario,
        constants: &ModelConstants,
        goal_source: GoalSource,
    ) -> Self {
        let ids: Vec<AgentId> = current.keys().copied().collect();
        let states: Vec<AgentState> = current.values().copied().collect();
        let goals = ids
            .iter()
            .zip(&states)
            .map(|(id, s)| {
                let ahead = s.position + s.velocity * GOAL_HORIZON;
                match goal_source {
                    GoalSource::Scenario => scenario.goals.get(id).copied().unwrap_or(ahead),
                    GoalSource::Extrapolate => ahead,
                }
            })
            .collect();
        let kinds: Vec<ModelKind> = ids
            .iter()
            .map(|&id| {
                let kind = result.model_of(id);
                if kind == ModelKind::Lin || result.params_of(kind, id).is_some() {
                    kind
                } else {
                    ModelKind::Lin
                }
            })
            .collect();
        let mut params = BTreeMap::new();
        for &kind in &kinds {
            params.entry(kind).or_insert_with(|| {
                ids.iter().map(|&id| result.params_of(kind, id).copied().unwrap_or_else(|| AgentParams::mean(kind))).collect()
            });
        }
        Self { ids, states, goals, kinds, params, obstacles: scenario.obstacles.clone(), dt: scenario.dt, constants: *constants }
    }

    pub fn predictor(&self) -> Predictor<'_> {
        let views = self
            .params
            .iter()
            .map(|(&kind, p)| (kind, CrowdView::new(&self.states, &self.goals, p, &self.obstacles, self.dt, &self.constants)))
            .collect();
        Predictor { crowd: self, views }
    }
}

/// Steps individual agents under their selected model while every other
/// agent stays frozen at its current state.
pub struct Predictor<'a> {
    crowd: &'a PreparedCrowd,
    views: BTreeMap<ModelKind, CrowdView<'a>>,
}

impl Predictor<'_> {
    pub fn index_of(&self, id: AgentId) -> Option<usize> {
        self.crowd.ids.binary_search(&id).ok()
    }

    /// Next state of the agent at `index` if it were in `state`.
    pub fn predict(&self, index: usize, state: &AgentState) -> AgentState {
        let kind = self.crowd.kinds[index];
        advance_agent(kind, index, state, &self.views[&kind])
    }

    pub fn predict_all(&self) -> BTreeMap<AgentId, AgentState> {
        self.crowd
            .ids
            .iter()
            .enumerate()
            .map(|(i, &id)| (id, self.predict(i, &self.crowd.states[i])))
            .collect()
    }
}

/// One step of the selected model(s) from `current`, toward the scenario's
/// goals (extrapolated for agents without one).
pub fn predict_next(
    result: &CalibrationResult,
    current: &BTreeMap<AgentId, AgentState>,
    scenario: &Scenario,
    constants: &ModelConstants,
) -> BTreeMap<AgentId, AgentState> {
    PreparedCrowd::new(result, current, scenario, constants, GoalSource::Scenario).predictor().predict_all()
}
