//! Parameterized crowd motion models `X_{t+1} = f(X_t, G, P)`.
//!
//! Four models are provided: constant velocity ([`ModelKind::Lin`]), Boids,
//! Social Forces and ORCA ([`ModelKind::Rvo`]). All of them are deterministic
//! and update every agent synchronously from a frozen copy of the current
//! states.

pub mod boids;
pub mod grid;
pub mod lin;
pub mod rvo;
pub mod social_forces;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Segment, Vec2};
use crate::scenario::Scenario;
use crate::state::{AgentId, AgentState, DEFAULT_V_CAP};

use grid::NeighborGrid;

/// The available motion models, ordered from cheapest to most expensive.
/// The order doubles as the tie-break when two models fit equally well.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Lin,
    Boids,
    #[serde(rename = "socialforces")]
    SocialForces,
    Rvo,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Lin, ModelKind::Boids, ModelKind::SocialForces, ModelKind::Rvo];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Lin => "lin",
            ModelKind::Boids => "boids",
            ModelKind::SocialForces => "socialforces",
            ModelKind::Rvo => "rvo",
        }
    }

    /// Optimizable parameters and their search ranges.
    pub fn param_ranges(self) -> &'static [ParamRange] {
        match self {
            ModelKind::Lin => &[],
            ModelKind::Boids => &BOIDS_RANGES,
            ModelKind::SocialForces => &SOCIAL_FORCES_RANGES,
            ModelKind::Rvo => &RVO_RANGES,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['_', '-'], "").as_str() {
            "lin" | "linear" => Ok(ModelKind::Lin),
            "boids" => Ok(ModelKind::Boids),
            "socialforces" | "sf" | "helbing" => Ok(ModelKind::SocialForces),
            "rvo" | "orca" => Ok(ModelKind::Rvo),
            other => Err(Error::InvalidInput(format!("unknown model `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    Radius,
    ComfortSpeed,
    NeighborDistance,
    AgentTimeHorizon,
    ObstacleTimeHorizon,
}

impl Param {
    pub fn name(self) -> &'static str {
        match self {
            Param::Radius => "radius",
            Param::ComfortSpeed => "comfort_speed",
            Param::NeighborDistance => "neighbor_distance",
            Param::AgentTimeHorizon => "agent_time_horizon",
            Param::ObstacleTimeHorizon => "obstacle_time_horizon",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamRange {
    pub param: Param,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

const fn range(param: Param, min: f64, max: f64, mean: f64) -> ParamRange {
    ParamRange { param, min, max, mean }
}

static BOIDS_RANGES: [ParamRange; 2] =
    [range(Param::Radius, 0.1, 1.0, 0.3), range(Param::ComfortSpeed, 1.0, 2.0, 1.5)];

static SOCIAL_FORCES_RANGES: [ParamRange; 2] =
    [range(Param::Radius, 0.1, 1.0, 0.3), range(Param::ComfortSpeed, 1.0, 2.0, 1.5)];

static RVO_RANGES: [ParamRange; 5] = [
    range(Param::ComfortSpeed, 1.0, 2.0, 1.5),
    range(Param::NeighborDistance, 2.0, 20.0, 11.0),
    range(Param::Radius, 0.2, 0.8, 0.5),
    range(Param::AgentTimeHorizon, 0.1, 5.0, 2.0),
    range(Param::ObstacleTimeHorizon, 0.1, 5.0, 2.0),
];

/// Parameters of one agent. Only the fields listed by
/// [`ModelKind::param_ranges`] are meaningful for a given model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentParams {
    pub radius: f64,
    pub comfort_speed: f64,
    pub neighbor_distance: f64,
    pub agent_time_horizon: f64,
    pub obstacle_time_horizon: f64,
}

impl Default for AgentParams {
    fn default() -> Self {
        Self::mean(ModelKind::Rvo)
    }
}

impl AgentParams {
    /// The mean column of the parameter table for `kind`; fields the model
    /// does not use take the ORCA means.
    pub fn mean(kind: ModelKind) -> Self {
        let mut p = AgentParams {
            radius: 0.5,
            comfort_speed: 1.5,
            neighbor_distance: 11.0,
            agent_time_horizon: 2.0,
            obstacle_time_horizon: 2.0,
        };
        for r in kind.param_ranges() {
            p.set(r.param, r.mean);
        }
        p
    }

    pub fn get(&self, param: Param) -> f64 {
        match param {
            Param::Radius => self.radius,
            Param::ComfortSpeed => self.comfort_speed,
            Param::NeighborDistance => self.neighbor_distance,
            Param::AgentTimeHorizon => self.agent_time_horizon,
            Param::ObstacleTimeHorizon => self.obstacle_time_horizon,
        }
    }

    pub fn set(&mut self, param: Param, value: f64) {
        match param {
            Param::Radius => self.radius = value,
            Param::ComfortSpeed => self.comfort_speed = value,
            Param::NeighborDistance => self.neighbor_distance = value,
            Param::AgentTimeHorizon => self.agent_time_horizon = value,
            Param::ObstacleTimeHorizon => self.obstacle_time_horizon = value,
        }
    }

    pub fn validate(&self, kind: ModelKind, agent: AgentId) -> Result<()> {
        for r in kind.param_ranges() {
            let v = self.get(r.param);
            if !(v >= r.min && v <= r.max) {
                return Err(Error::InvalidParams {
                    agent,
                    reason: format!("{} = {v} outside [{}, {}]", r.param.name(), r.min, r.max),
                });
            }
        }
        Ok(())
    }

    /// The optimized values in `kind`'s parameter order.
    pub fn to_vec(&self, kind: ModelKind) -> Vec<f64> {
        kind.param_ranges().iter().map(|r| self.get(r.param)).collect()
    }

    pub fn from_slice(kind: ModelKind, values: &[f64]) -> Self {
        let mut p = Self::mean(kind);
        for (r, &v) in kind.param_ranges().iter().zip(values) {
            p.set(r.param, v);
        }
        p
    }
}

/// Per-agent parameters for one model, as fitted by calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub kind: ModelKind,
    pub agents: BTreeMap<AgentId, AgentParams>,
}

impl ModelParams {
    pub fn new(kind: ModelKind) -> Self {
        Self { kind, agents: BTreeMap::new() }
    }

    /// Every listed agent at the mean parameters of `kind`.
    pub fn mean(kind: ModelKind, agents: impl IntoIterator<Item = AgentId>) -> Self {
        Self { kind, agents: agents.into_iter().map(|id| (id, AgentParams::mean(kind))).collect() }
    }

    pub fn uniform(kind: ModelKind, agents: impl IntoIterator<Item = AgentId>, params: AgentParams) -> Self {
        Self { kind, agents: agents.into_iter().map(|id| (id, params)).collect() }
    }

    pub fn get(&self, id: AgentId) -> Option<&AgentParams> {
        self.agents.get(&id)
    }

    pub fn validate(&self) -> Result<()> {
        for (&id, p) in &self.agents {
            p.validate(self.kind, id)?;
        }
        Ok(())
    }

    /// Number of optimized values (agents × model parameters).
    pub fn dimension(&self) -> usize {
        self.agents.len() * self.kind.param_ranges().len()
    }

    /// Flattens the optimized values, agent-major.
    pub fn to_flat(&self) -> Vec<f64> {
        self.agents.values().flat_map(|p| p.to_vec(self.kind)).collect()
    }

    pub fn from_flat(kind: ModelKind, agents: &[AgentId], values: &[f64]) -> Self {
        let n = kind.param_ranges().len();
        let agents = agents
            .iter()
            .enumerate()
            .map(|(i, &id)| (id, AgentParams::from_slice(kind, &values[i * n..(i + 1) * n])))
            .collect();
        Self { kind, agents }
    }
}

/// Fixed model constants. These are not optimized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConstants {
    /// Hard speed cap on every state, m/s.
    pub v_cap: f64,
    /// Social Forces relaxation time τ, s.
    pub relaxation_time: f64,
    /// Social Forces repulsion strength A, m/s².
    pub repulsion_strength: f64,
    /// Social Forces repulsion decay length B, m.
    pub repulsion_range: f64,
    /// Social Forces contact stiffness (per unit mass), 1/s².
    pub contact_stiffness: f64,
    /// Cap on a single Social Forces pairwise repulsion, m/s².
    pub max_pair_force: f64,
    /// Social Forces interaction cutoff, m.
    pub social_cutoff: f64,
    pub boids_separation: f64,
    pub boids_alignment: f64,
    pub boids_cohesion: f64,
    pub boids_goal: f64,
    /// Boids neighborhood radius, m.
    pub boids_neighbor_radius: f64,
    /// Boids separation lookahead, s.
    pub boids_lookahead: f64,
}

impl Default for ModelConstants {
    fn default() -> Self {
        Self {
            v_cap: DEFAULT_V_CAP,
            relaxation_time: 0.5,
            repulsion_strength: 2.0,
            repulsion_range: 0.3,
            contact_stiffness: 20.0,
            max_pair_force: 20.0,
            social_cutoff: 5.0,
            boids_separation: 2.0,
            boids_alignment: 0.5,
            boids_cohesion: 0.5,
            boids_goal: 1.0,
            boids_neighbor_radius: 5.0,
            boids_lookahead: 1.0,
        }
    }
}

impl ModelConstants {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("v_cap", self.v_cap),
            ("relaxation_time", self.relaxation_time),
            ("repulsion_range", self.repulsion_range),
            ("social_cutoff", self.social_cutoff),
            ("boids_neighbor_radius", self.boids_neighbor_radius),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("repulsion_strength", self.repulsion_strength),
            ("contact_stiffness", self.contact_stiffness),
            ("max_pair_force", self.max_pair_force),
            ("boids_separation", self.boids_separation),
            ("boids_alignment", self.boids_alignment),
            ("boids_cohesion", self.boids_cohesion),
            ("boids_goal", self.boids_goal),
            ("boids_lookahead", self.boids_lookahead),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }
}

/// Velocity toward `goal` at `comfort_speed`, slowing down to land exactly
/// on the goal when it is less than one step away.
pub fn preferred_velocity(position: Vec2, goal: Vec2, comfort_speed: f64, dt: f64) -> Vec2 {
    let to_goal = goal - position;
    let dist = to_goal.length();
    if dist <= 1e-12 {
        Vec2::ZERO
    } else if dist > comfort_speed * dt {
        to_goal * (comfort_speed / dist)
    } else {
        to_goal / dt
    }
}

/// A frozen, index-addressed view of all agents for one model update.
///
/// `params[j]` holds agent `j`'s parameters for the model being stepped;
/// neighbors' parameters (e.g. ORCA radii) are read from the same array.
pub struct CrowdView<'a> {
    pub states: &'a [AgentState],
    pub positions: Vec<Vec2>,
    pub goals: &'a [Vec2],
    pub params: &'a [AgentParams],
    pub obstacles: &'a [Segment],
    pub dt: f64,
    pub constants: &'a ModelConstants,
    grid: NeighborGrid,
}

impl<'a> CrowdView<'a> {
    pub fn new(
        states: &'a [AgentState],
        goals: &'a [Vec2],
        params: &'a [AgentParams],
        obstacles: &'a [Segment],
        dt: f64,
        constants: &'a ModelConstants,
    ) -> Self {
        let positions: Vec<Vec2> = states.iter().map(|s| s.position).collect();
        let reach = params
            .iter()
            .map(|p| p.neighbor_distance)
            .fold(constants.boids_neighbor_radius.max(constants.social_cutoff), f64::max);
        let grid = NeighborGrid::build(positions.iter().copied(), reach);
        Self { states, positions, goals, params, obstacles, dt, constants, grid }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Agents within `radius` of `center`, excluding agent `skip`.
    pub fn neighbors(&self, center: Vec2, radius: f64, skip: usize, out: &mut Vec<usize>) {
        self.grid.query(&self.positions, center, radius, Some(skip), out);
    }

    /// Runs `f` on the neighbor indices using a per-thread scratch buffer.
    pub(crate) fn with_neighbors<R>(&self, center: Vec2, radius: f64, skip: usize, f: impl FnOnce(&[usize]) -> R) -> R {
        thread_local! {
            static SCRATCH: std::cell::RefCell<Vec<usize>> = const { std::cell::RefCell::new(Vec::new()) };
        }
        SCRATCH.with(|cell| match cell.try_borrow_mut() {
            Ok(mut ids) => {
                self.neighbors(center, radius, skip, &mut ids);
                f(&ids)
            }
            Err(_) => {
                let mut ids = Vec::new();
                self.neighbors(center, radius, skip, &mut ids);
                f(&ids)
            }
        })
    }
}

/// Next state of agent `index` if its current state were `state`, with every
/// other agent frozen at its state in `view`.
pub fn advance_agent(kind: ModelKind, index: usize, state: &AgentState, view: &CrowdView<'_>) -> AgentState {
    advance_agent_with(kind, index, state, &view.params[index], view)
}

/// Like [`advance_agent`], but the agent uses `params` instead of its entry
/// in `view.params`. Neighbors still read theirs from the view.
pub fn advance_agent_with(
    kind: ModelKind,
    index: usize,
    state: &AgentState,
    params: &AgentParams,
    view: &CrowdView<'_>,
) -> AgentState {
    let next = match kind {
        ModelKind::Lin => lin::advance(state, view.dt),
        ModelKind::Boids => boids::advance(index, state, params, view),
        ModelKind::SocialForces => social_forces::advance(index, state, params, view),
        ModelKind::Rvo => rvo::advance(index, state, params, view),
    };
    next.with_speed_cap(view.constants.v_cap)
}

/// Synchronous update of every agent in `view`.
pub fn step_dense(kind: ModelKind, view: &CrowdView<'_>, out: &mut Vec<AgentState>) {
    out.clear();
    out.extend(view.states.iter().enumerate().map(|(i, s)| advance_agent(kind, i, s, view)));
}

/// One timestep of model `kind` for every agent in `states`.
pub fn step(
    kind: ModelKind,
    states: &BTreeMap<AgentId, AgentState>,
    scenario: &Scenario,
    params: &ModelParams,
    constants: &ModelConstants,
) -> Result<BTreeMap<AgentId, AgentState>> {
    let ids: Vec<AgentId> = states.keys().copied().collect();
    let dense_states: Vec<AgentState> = states.values().copied().collect();
    let mut goals = Vec::with_capacity(ids.len());
    let mut dense_params = Vec::with_capacity(ids.len());
    for &id in &ids {
        if kind == ModelKind::Lin {
            goals.push(Vec2::ZERO);
            dense_params.push(AgentParams::mean(kind));
            continue;
        }
        goals.push(scenario.goal(id)?);
        let p = params.get(id).ok_or_else(|| Error::InvalidParams {
            agent: id,
            reason: format!("no {} parameters", kind.name()),
        })?;
        p.validate(kind, id)?;
        dense_params.push(*p);
    }
    let view = CrowdView::new(&dense_states, &goals, &dense_params, &scenario.obstacles, scenario.dt, constants);
    let mut next = Vec::with_capacity(ids.len());
    step_dense(kind, &view, &mut next);
    Ok(ids.into_iter().zip(next).collect())
}
