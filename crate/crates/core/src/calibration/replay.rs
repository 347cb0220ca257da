//! Replay error: re-simulate the window from its oldest state and compare
//! against the tracked states.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Segment, Vec2};
use crate::models::{advance_agent_with, step_dense, AgentParams, CrowdView, ModelConstants, ModelKind, ModelParams};
use crate::scenario::Scenario;
use crate::state::{AgentId, AgentState, StateHistory};

/// Summed position error over the window, total and per agent.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayError {
    pub total: f64,
    pub per_agent: BTreeMap<AgentId, f64>,
}

/// Goals used while replaying a window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReplayGoals {
    /// Each agent's position in the newest snapshot.
    #[default]
    WindowEnd,
    /// The scenario's goal, or the newest position for agents without one.
    Scenario,
}

/// How agents other than the one being scored move during a replay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReplayScheme {
    /// Every agent is re-simulated together.
    Joint,
    /// Each agent is re-simulated alone while the others follow their
    /// tracked states, which splits the fit into one small problem per agent.
    #[default]
    Conditional,
}

/// A window prepared for repeated replays.
///
/// Only agents present in every snapshot take part. The replay starts from
/// the oldest snapshot.
#[derive(Debug, Clone)]
pub struct ReplayProblem {
    ids: Vec<AgentId>,
    /// observed[i][a]: state of agent `a` at window index `i`.
    observed: Vec<Vec<AgentState>>,
    goals: Vec<Vec2>,
    obstacles: Vec<Segment>,
    dt: f64,
    constants: ModelConstants,
}

impl ReplayProblem {
    /// Replays toward each agent's newest window position.
    pub fn new(window: &StateHistory, scenario: &Scenario, constants: &ModelConstants) -> Result<Self> {
        Self::with_goals(window, scenario, constants, ReplayGoals::WindowEnd)
    }

    pub fn with_goals(
        window: &StateHistory,
        scenario: &Scenario,
        constants: &ModelConstants,
        goals: ReplayGoals,
    ) -> Result<Self> {
        if window.len() < 2 {
            return Err(Error::Data(format!("replay needs at least 2 window states, got {}", window.len())));
        }
        let ids = window.persistent_agents();
        let observed: Vec<Vec<AgentState>> =
            window.snapshots().map(|s| ids.iter().map(|id| s.agents[id]).collect()).collect();
        let newest = observed.last().expect("at least two states");
        let goals = ids
            .iter()
            .zip(newest)
            .map(|(id, s)| match goals {
                ReplayGoals::WindowEnd => s.position,
                ReplayGoals::Scenario => scenario.goals.get(id).copied().unwrap_or(s.position),
            })
            .collect();
        Ok(Self { ids, observed, goals, obstacles: scenario.obstacles.clone(), dt: window.dt(), constants: *constants })
    }

    pub fn agents(&self) -> &[AgentId] {
        &self.ids
    }

    pub fn frames(&self) -> usize {
        self.observed.len()
    }

    /// Per-agent errors for dense parameters (one entry per agent, in id order).
    pub fn per_agent_errors(&self, kind: ModelKind, params: &[AgentParams]) -> Vec<f64> {
        let mut errors = vec![0.0; self.ids.len()];
        let mut current = self.observed[0].clone();
        let mut next = Vec::with_capacity(current.len());
        for observed in &self.observed[1..] {
            let view = CrowdView::new(&current, &self.goals, params, &self.obstacles, self.dt, &self.constants);
            step_dense(kind, &view, &mut next);
            for ((e, sim), obs) in errors.iter_mut().zip(&next).zip(observed) {
                *e += sim.position.distance(obs.position);
            }
            std::mem::swap(&mut current, &mut next);
        }
        errors
    }

    /// Total error of a flat, agent-major parameter vector.
    pub fn error_flat(&self, kind: ModelKind, values: &[f64]) -> f64 {
        self.per_agent_errors(kind, &self.dense_params(kind, values)).iter().sum()
    }

    pub fn dense_params(&self, kind: ModelKind, values: &[f64]) -> Vec<AgentParams> {
        let n = kind.param_ranges().len();
        (0..self.ids.len()).map(|i| AgentParams::from_slice(kind, &values[i * n..(i + 1) * n])).collect()
    }

    pub fn evaluate(&self, kind: ModelKind, params: &ModelParams) -> Result<ReplayError> {
        let dense: Vec<AgentParams> = if kind == ModelKind::Lin {
            vec![AgentParams::mean(kind); self.ids.len()]
        } else {
            self.ids
                .iter()
                .map(|id| {
                    let p = params.get(*id).ok_or_else(|| Error::InvalidParams {
                        agent: *id,
                        reason: format!("no {} parameters", kind.name()),
                    })?;
                    p.validate(kind, *id)?;
                    Ok(*p)
                })
                .collect::<Result<_>>()?
        };
        let per = self.per_agent_errors(kind, &dense);
        Ok(ReplayError { total: per.iter().sum(), per_agent: self.ids.iter().copied().zip(per).collect() })
    }
}

/// Per-agent replays of one model in which every other agent follows its
/// tracked states and uses the `context` parameters.
pub struct ConditionalReplay<'a> {
    problem: &'a ReplayProblem,
    kind: ModelKind,
    views: Vec<CrowdView<'a>>,
}

impl ReplayProblem {
    pub fn conditional<'a>(&'a self, kind: ModelKind, context: &'a [AgentParams]) -> ConditionalReplay<'a> {
        assert_eq!(context.len(), self.ids.len(), "one context entry per agent");
        let views = self.observed[..self.observed.len() - 1]
            .iter()
            .map(|states| CrowdView::new(states, &self.goals, context, &self.obstacles, self.dt, &self.constants))
            .collect();
        ConditionalReplay { problem: self, kind, views }
    }
}

impl ConditionalReplay<'_> {
    /// Error of agent `index` (position in [`ReplayProblem::agents`]) when it
    /// uses `params`.
    pub fn agent_error(&self, index: usize, params: &AgentParams) -> f64 {
        let observed = &self.problem.observed;
        let mut sim = observed[0][index];
        let mut error = 0.0;
        for (view, obs) in self.views.iter().zip(&observed[1..]) {
            sim = advance_agent_with(self.kind, index, &sim, params, view);
            error += sim.position.distance(obs[index].position);
        }
        error
    }

    pub fn errors(&self, params: &[AgentParams]) -> Vec<f64> {
        params.iter().enumerate().map(|(i, p)| self.agent_error(i, p)).collect()
    }
}

/// Σ over window frames and agents of ‖S_i − X_i‖ for model `kind`.
pub fn replay_error(
    kind: ModelKind,
    params: &ModelParams,
    window: &StateHistory,
    scenario: &Scenario,
    constants: &ModelConstants,
) -> Result<ReplayError> {
    ReplayProblem::new(window, scenario, constants)?.evaluate(kind, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Bounds;
    use crate::state::Snapshot;

    fn scenario(dt: f64) -> Scenario {
        Scenario::new(dt, Bounds::new(Vec2::splat(-100.0), Vec2::splat(100.0)))
    }

    #[test]
    fn lin_reproduces_its_own_output() {
        let dt = 0.1;
        let mut h = StateHistory::new(10, dt).unwrap();
        let v = [Vec2::new(1.0, 0.5), Vec2::new(-0.25, 1.25)];
        let mut pos = [Vec2::ZERO, Vec2::new(3.0, 3.0)];
        for f in 0..11 {
            let agents = (0..2).map(|a| (a as AgentId, AgentState::new(pos[a], v[a]))).collect();
            h.push(Snapshot::new(f, agents)).unwrap();
            for a in 0..2 {
                pos[a] += v[a] * dt;
            }
        }
        let e = replay_error(ModelKind::Lin, &ModelParams::new(ModelKind::Lin), &h, &scenario(dt), &ModelConstants::default()).unwrap();
        assert_eq!(e.total, 0.0);
    }

    #[test]
    fn constant_offset_sums_pythagorean_distances() {
        let dt = 0.1;
        let mut h = StateHistory::new(5, dt).unwrap();
        let v = Vec2::new(1.0, 0.0);
        h.push(Snapshot::new(0, BTreeMap::from([(1, AgentState::new(Vec2::ZERO, v))]))).unwrap();
        for i in 1..=5u64 {
            let p = Vec2::new(i as f64 * dt, 0.0) + Vec2::new(0.3, 0.4);
            h.push(Snapshot::new(i, BTreeMap::from([(1, AgentState::new(p, v))]))).unwrap();
        }
        let e = replay_error(ModelKind::Lin, &ModelParams::new(ModelKind::Lin), &h, &scenario(dt), &ModelConstants::default()).unwrap();
        assert!((e.total - 2.5).abs() < 1e-9, "{}", e.total);
        assert_eq!(e.per_agent[&1], e.total);
    }

    #[test]
    fn short_window_is_an_error() {
        let mut h = StateHistory::new(5, 0.1).unwrap();
        h.push(Snapshot::new(0, BTreeMap::from([(1, AgentState::at(0.0, 0.0))]))).unwrap();
        assert!(replay_error(ModelKind::Lin, &ModelParams::new(ModelKind::Lin), &h, &scenario(0.1), &ModelConstants::default()).is_err());
    }

    #[test]
    fn agents_absent_from_part_of_the_window_are_skipped() {
        let mut h = StateHistory::new(3, 0.1).unwrap();
        h.push(Snapshot::new(0, BTreeMap::from([(1, AgentState::at(0.0, 0.0)), (2, AgentState::at(5.0, 0.0))]))).unwrap();
        h.push(Snapshot::new(1, BTreeMap::from([(1, AgentState::at(0.0, 0.0))]))).unwrap();
        let e = replay_error(ModelKind::Lin, &ModelParams::new(ModelKind::Lin), &h, &scenario(0.1), &ModelConstants::default()).unwrap();
        assert_eq!(e.per_agent.keys().copied().collect::<Vec<_>>(), vec![1]);
    }
}
