//! Synthetic ground truth: templated scenarios stepped by a chosen motion
//! model, and corruption of the result into noisy, partially occluded
//! observations.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Record, SourceTag, TrajectoryDataset};
use crate::error::{Error, Result};
use crate::geometry::{Bounds, Segment, Vec2};
use crate::models::{step_dense, AgentParams, CrowdView, ModelConstants, ModelKind, ModelParams};
use crate::rng::{derive_seed, substream};
use crate::scenario::Scenario;
use crate::state::{AgentId, AgentState};

pub const DEFAULT_FRAMES: usize = 200;
pub const DEFAULT_DT: f64 = 1.0 / 25.0;
const PLACEMENT_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateKind {
    /// Two groups crossing at right angles.
    Crossing,
    /// Two groups walking toward each other along a walled corridor.
    HeadOnCorridor,
    /// Agents on a circle swapping to the antipodal point.
    CircleSwap,
    /// Agents scattered in a square, each heading to a random point.
    RandomGoals,
}

impl TemplateKind {
    pub const ALL: [TemplateKind; 4] =
        [TemplateKind::Crossing, TemplateKind::HeadOnCorridor, TemplateKind::CircleSwap, TemplateKind::RandomGoals];

    pub fn name(self) -> &'static str {
        match self {
            TemplateKind::Crossing => "crossing",
            TemplateKind::HeadOnCorridor => "head_on_corridor",
            TemplateKind::CircleSwap => "circle_swap",
            TemplateKind::RandomGoals => "random_goals",
        }
    }
}

impl FromStr for TemplateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown scenario template `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DensityClass {
    Low,
    Medium,
    High,
}

impl DensityClass {
    pub const ALL: [DensityClass; 3] = [DensityClass::Low, DensityClass::Medium, DensityClass::High];

    /// Local density in agents per square meter.
    pub fn agents_per_m2(self) -> f64 {
        match self {
            DensityClass::Low => 0.3,
            DensityClass::Medium => 1.0,
            DensityClass::High => 2.5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DensityClass::Low => "low",
            DensityClass::Medium => "medium",
            DensityClass::High => "high",
        }
    }
}

impl FromStr for DensityClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown density class `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTemplate {
    pub kind: TemplateKind,
    pub agent_count: usize,
    pub density: DensityClass,
    /// Side of the square arena for `random_goals`; derived from the density
    /// when absent. Other templates size themselves from the density.
    pub arena_size: Option<f64>,
    pub seed: u64,
    pub dt: f64,
}

impl ScenarioTemplate {
    pub fn new(kind: TemplateKind, agent_count: usize, density: DensityClass, seed: u64) -> Self {
        Self { kind, agent_count, density, arena_size: None, seed, dt: DEFAULT_DT }
    }

    pub fn validate(&self) -> Result<()> {
        if self.agent_count == 0 {
            return Err(Error::InvalidInput("agent count must be at least 1".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidInput(format!("timestep must be positive, got {}", self.dt)));
        }
        if let Some(a) = self.arena_size {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::InvalidInput(format!("arena size must be positive, got {a}")));
            }
        }
        Ok(())
    }

    fn spacing(&self) -> f64 {
        1.0 / self.density.agents_per_m2().sqrt()
    }
}

/// What generated a ground-truth trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub model: ModelKind,
    pub params: ModelParams,
    pub seed: u64,
    pub template: Option<ScenarioTemplate>,
    pub frames: usize,
    pub dt: f64,
}

impl Provenance {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub scenario: Scenario,
    pub ground_truth: TrajectoryDataset,
    pub provenance: Provenance,
}

/// Initial positions and goals for `template`, without velocities.
pub struct Layout {
    pub positions: Vec<Vec2>,
    pub goals: Vec<Vec2>,
    pub obstacles: Vec<Segment>,
}

/// Places the template's agents so that every pair is more than
/// `2 * max_radius` apart.
pub fn layout(template: &ScenarioTemplate, max_radius: f64) -> Result<Layout> {
    template.validate()?;
    let mut rng = substream(template.seed, &[0x5C]);
    let s = template.spacing();
    let n = template.agent_count;
    let min_dist = 2.0 * max_radius;
    for _ in 0..PLACEMENT_ATTEMPTS {
        let candidate = match template.kind {
            TemplateKind::Crossing => {
                let (na, nb) = (n.div_ceil(2), n / 2);
                let side = (na as f64).sqrt().ceil() * s;
                let d = side / 2.0 + 1.0;
                let travel = 2.0 * d + side;
                let a = block(&mut rng, na, Vec2::new(-d - side, -side / 2.0), side, side, s, min_dist);
                let b = block(&mut rng, nb, Vec2::new(-side / 2.0, -d - side), side, side, s, min_dist);
                let goals = a.iter().map(|p| *p + Vec2::new(travel, 0.0)).chain(b.iter().map(|p| *p + Vec2::new(0.0, travel)));
                let goals = goals.collect();
                Layout { positions: a.into_iter().chain(b).collect(), goals, obstacles: Vec::new() }
            }
            TemplateKind::HeadOnCorridor => {
                let (na, nb) = (n.div_ceil(2), n / 2);
                let width = ((na as f64).sqrt().ceil() * s).max(2.0);
                let rows = ((width / s).floor() as usize).max(1);
                let length = na.div_ceil(rows) as f64 * s;
                let d = 1.0 + s / 2.0;
                let travel = 2.0 * d + length;
                let a = block(&mut rng, na, Vec2::new(-d - length, -width / 2.0), length, width, s, min_dist);
                let b = block(&mut rng, nb, Vec2::new(d, -width / 2.0), length, width, s, min_dist);
                let goals = a.iter().map(|p| *p + Vec2::new(travel, 0.0)).chain(b.iter().map(|p| *p - Vec2::new(travel, 0.0)));
                let goals = goals.collect();
                let half = width / 2.0 + 0.5;
                let reach = d + length + travel;
                let obstacles = vec![
                    Segment::new(Vec2::new(-reach, half), Vec2::new(reach, half)),
                    Segment::new(Vec2::new(-reach, -half), Vec2::new(reach, -half)),
                ];
                Layout { positions: a.into_iter().chain(b).collect(), goals, obstacles }
            }
            TemplateKind::CircleSwap => {
                let radius = (n as f64 * s / std::f64::consts::TAU).max(2.0);
                let step = std::f64::consts::TAU / n as f64;
                let positions: Vec<Vec2> = (0..n)
                    .map(|i| {
                        let angle = i as f64 * step + rng.random_range(-0.1..=0.1) * step;
                        Vec2::from_angle(angle) * radius
                    })
                    .collect();
                let goals = positions.iter().map(|p| -*p).collect();
                Layout { positions, goals, obstacles: Vec::new() }
            }
            TemplateKind::RandomGoals => {
                let side = template.arena_size.unwrap_or((n as f64).sqrt().ceil() * s);
                let origin = Vec2::splat(-side / 2.0);
                let positions = block(&mut rng, n, origin, side, side, s.min(side / (n as f64).sqrt().ceil()), min_dist);
                let goals = (0..n)
                    .map(|_| origin + Vec2::new(rng.random_range(0.0..=side), rng.random_range(0.0..=side)))
                    .collect();
                Layout { positions, goals, obstacles: Vec::new() }
            }
        };
        if min_pairwise_distance(&candidate.positions) > min_dist {
            return Ok(candidate);
        }
    }
    Err(Error::InvalidInput(format!(
        "could not place {n} agents more than {min_dist} m apart after {PLACEMENT_ATTEMPTS} attempts"
    )))
}

/// `n` points on a jittered lattice of pitch `pitch` inside the rectangle
/// `[origin, origin + (w, h)]`, cells chosen at random.
fn block(rng: &mut crate::rng::Rng, n: usize, origin: Vec2, w: f64, h: f64, pitch: f64, min_dist: f64) -> Vec<Vec2> {
    if n == 0 {
        return Vec::new();
    }
    let cols = ((w / pitch).floor() as usize).max(1);
    let rows = ((h / pitch).floor() as usize).max(1).max(n.div_ceil(cols));
    let (cw, ch) = (w / cols as f64, h / rows as f64);
    // Neighbouring cells can never jitter closer than `min_dist`.
    let amplitude = |c: f64| (0.25 * c).min(0.49 * (c - min_dist)).max(0.0);
    let (jx, jy) = (amplitude(cw), amplitude(ch));
    let mut cells: Vec<(usize, usize)> = (0..rows).flat_map(|r| (0..cols).map(move |c| (r, c))).collect();
    cells.shuffle(rng);
    cells
        .into_iter()
        .take(n)
        .map(|(r, c)| {
            let jitter = Vec2::new(rng.random_range(-1.0..=1.0) * jx, rng.random_range(-1.0..=1.0) * jy);
            origin + Vec2::new((c as f64 + 0.5) * cw, (r as f64 + 0.5) * ch) + jitter
        })
        .collect()
}

pub fn min_pairwise_distance(points: &[Vec2]) -> f64 {
    let mut best = f64::INFINITY;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            best = best.min(a.distance(*b));
        }
    }
    best
}

/// Independent uniform draws from the parameter table ranges of `kind`.
pub fn sample_params(kind: ModelKind, agents: impl IntoIterator<Item = AgentId>, seed: u64) -> ModelParams {
    let agents = agents
        .into_iter()
        .map(|id| {
            let mut rng = substream(seed, &[0x9A, id as u64]);
            let mut p = AgentParams::mean(kind);
            for r in kind.param_ranges() {
                p.set(r.param, rng.random_range(r.min..=r.max));
            }
            (id, p)
        })
        .collect();
    ModelParams { kind, agents }
}

/// [`sample_params`] for the template's agents, with radii capped at 0.4 of
/// the lattice pitch so that the layout always fits.
pub fn sample_template_params(template: &ScenarioTemplate, kind: ModelKind, seed: u64) -> ModelParams {
    let mut params = sample_params(kind, 0..template.agent_count as AgentId, seed);
    let cap = 0.4 * template.spacing();
    for p in params.agents.values_mut() {
        p.radius = p.radius.min(cap);
    }
    params
}

/// Builds the scenario for `template` and steps `kind` with `params` from it.
/// Agents start walking toward their goals at their comfort speed.
pub fn generate(
    template: &ScenarioTemplate,
    kind: ModelKind,
    params: &ModelParams,
    frames: usize,
    constants: &ModelConstants,
) -> Result<Generated> {
    template.validate()?;
    let ids: Vec<AgentId> = (0..template.agent_count as AgentId).collect();
    let dense: Vec<AgentParams> = ids
        .iter()
        .map(|&id| match kind {
            ModelKind::Lin => Ok(params.get(id).copied().unwrap_or_else(|| AgentParams::mean(kind))),
            _ => {
                let p = params.get(id).copied().ok_or_else(|| Error::InvalidParams {
                    agent: id,
                    reason: format!("no {} parameters", kind.name()),
                })?;
                p.validate(kind, id)?;
                Ok(p)
            }
        })
        .collect::<Result<_>>()?;
    let max_radius = match kind {
        ModelKind::Lin => 0.0,
        _ => dense.iter().map(|p| p.radius).fold(0.0, f64::max),
    };
    let layout = layout(template, max_radius)?;

    let mut lo = Vec2::splat(f64::INFINITY);
    let mut hi = Vec2::splat(f64::NEG_INFINITY);
    for p in layout.positions.iter().chain(&layout.goals).chain(layout.obstacles.iter().flat_map(|s| [&s.a, &s.b])) {
        lo = lo.min(*p);
        hi = hi.max(*p);
    }
    let mut scenario = Scenario::new(template.dt, Bounds::new(lo - Vec2::splat(2.0), hi + Vec2::splat(2.0)));
    scenario.obstacles = layout.obstacles;
    scenario.goals = ids.iter().copied().zip(layout.goals.iter().copied()).collect();

    let initial = ids
        .iter()
        .zip(&layout.positions)
        .zip(&layout.goals)
        .zip(&dense)
        .map(|(((&id, &p), &g), params)| {
            let dir = (g - p).normalize_or_zero();
            (id, AgentState::new(p, dir * params.comfort_speed))
        })
        .collect();
    let ground_truth = simulate(&initial, &scenario, kind, params, frames, constants)?;
    Ok(Generated {
        scenario,
        ground_truth,
        provenance: Provenance {
            model: kind,
            params: params.clone(),
            seed: template.seed,
            template: Some(template.clone()),
            frames,
            dt: template.dt,
        },
    })
}

/// Steps `kind` from explicit initial states. Frame 0 holds `initial`; the
/// dataset has `frames` frames in total and carries model velocities.
pub fn simulate(
    initial: &BTreeMap<AgentId, AgentState>,
    scenario: &Scenario,
    kind: ModelKind,
    params: &ModelParams,
    frames: usize,
    constants: &ModelConstants,
) -> Result<TrajectoryDataset> {
    scenario.validate()?;
    let ids: Vec<AgentId> = initial.keys().copied().collect();
    let mut goals = Vec::with_capacity(ids.len());
    let mut dense = Vec::with_capacity(ids.len());
    for &id in &ids {
        if kind == ModelKind::Lin {
            goals.push(Vec2::ZERO);
            dense.push(AgentParams::mean(kind));
        } else {
            goals.push(scenario.goal(id)?);
            let p = params.get(id).copied().ok_or_else(|| Error::InvalidParams {
                agent: id,
                reason: format!("no {} parameters", kind.name()),
            })?;
            p.validate(kind, id)?;
            dense.push(p);
        }
    }
    if initial.values().any(|s| !s.is_finite()) {
        return Err(Error::InvalidInput("initial states must be finite".into()));
    }
    let mut states: Vec<AgentState> = initial.values().copied().collect();
    let mut next = Vec::with_capacity(states.len());
    let mut records = Vec::with_capacity(frames * ids.len());
    for frame in 0..frames as u64 {
        records.extend(
            ids.iter().zip(&states).map(|(&id, s)| Record::new(frame, id, s.position).with_velocity(s.velocity)),
        );
        if frame + 1 < frames as u64 {
            let view = CrowdView::new(&states, &goals, &dense, &scenario.obstacles, scenario.dt, constants);
            step_dense(kind, &view, &mut next);
            std::mem::swap(&mut states, &mut next);
        }
    }
    Ok(TrajectoryDataset::new(records, 1.0 / scenario.dt, SourceTag::GroundTruth))
}

/// Adds iid Gaussian position noise, strips velocities and drops each record
/// with probability `dropout`. Each record's randomness is keyed by its (frame, agent) pair,
/// so the result does not depend on record order.
pub fn corrupt(gt: &TrajectoryDataset, sigma: f64, dropout: f64, seed: u64) -> Result<TrajectoryDataset> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidInput(format!("observation sigma must be non-negative, got {sigma}")));
    }
    if !(0.0..1.0).contains(&dropout) {
        return Err(Error::InvalidInput(format!("dropout probability must be in [0, 1), got {dropout}")));
    }
    let normal = Normal::new(0.0, sigma).expect("sigma validated");
    let records = gt
        .records
        .iter()
        .filter_map(|r| {
            let mut rng = substream(seed, &[0xC0, r.frame, r.agent_id as u64]);
            let drop = rng.random::<f64>() < dropout;
            let (dx, dy) = (normal.sample(&mut rng), normal.sample(&mut rng));
            (!drop).then(|| {
                // Sensors report positions only.
                let mut out = Record { vx: None, vy: None, ..*r };
                if sigma > 0.0 {
                    out.x += dx;
                    out.y += dy;
                }
                out
            })
        })
        .collect();
    Ok(TrajectoryDataset::new(records, gt.frame_rate, SourceTag::Observation))
}

/// Removes agent `agent`'s records in `frames`.
pub fn occlude(ds: &TrajectoryDataset, agent: AgentId, frames: RangeInclusive<u64>) -> TrajectoryDataset {
    let records = ds.records.iter().filter(|r| !(r.agent_id == agent && frames.contains(&r.frame))).copied().collect();
    TrajectoryDataset::new(records, ds.frame_rate, ds.source)
}

/// Long occlusions: each agent independently, with probability
/// `probability`, loses one contiguous run of frames whose length is drawn
/// uniformly from `length`. The run never touches the agent's first
/// `lead_in` frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcclusionModel {
    pub probability: f64,
    pub length: (u64, u64),
    pub lead_in: u64,
}

impl OcclusionModel {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.probability) {
            return Err(Error::InvalidInput(format!("occlusion probability must be in [0, 1], got {}", self.probability)));
        }
        if self.length.0 < 1 || self.length.0 > self.length.1 {
            return Err(Error::InvalidInput(format!("bad occlusion length range {:?}", self.length)));
        }
        Ok(())
    }

    /// The occluded frame range of every affected agent.
    pub fn spans(&self, ds: &TrajectoryDataset, seed: u64) -> Result<BTreeMap<AgentId, RangeInclusive<u64>>> {
        self.validate()?;
        let mut extent: BTreeMap<AgentId, (u64, u64)> = BTreeMap::new();
        for r in &ds.records {
            let e = extent.entry(r.agent_id).or_insert((r.frame, r.frame));
            e.0 = e.0.min(r.frame);
            e.1 = e.1.max(r.frame);
        }
        let mut out = BTreeMap::new();
        for (id, (first, last)) in extent {
            let mut rng = substream(seed, &[0x0C, id as u64]);
            if rng.random::<f64>() >= self.probability {
                continue;
            }
            let len = rng.random_range(self.length.0..=self.length.1);
            let earliest = first + self.lead_in;
            if earliest > last {
                continue;
            }
            let start = rng.random_range(earliest..=last);
            out.insert(id, start..=(start + len - 1).min(last));
        }
        Ok(out)
    }

    pub fn apply(&self, ds: &TrajectoryDataset, seed: u64) -> Result<TrajectoryDataset> {
        let spans = self.spans(ds, seed)?;
        let records = ds
            .records
            .iter()
            .filter(|r| !spans.get(&r.agent_id).is_some_and(|s| s.contains(&r.frame)))
            .copied()
            .collect();
        Ok(TrajectoryDataset::new(records, ds.frame_rate, ds.source))
    }
}

/// A family of seeded tracking scenes: templates cycle with the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackingSuite {
    pub model: ModelKind,
    pub agents: usize,
    pub density: DensityClass,
    pub frames: usize,
    pub observation_sigma: f64,
    pub dropout: f64,
    pub occlusion: Option<OcclusionModel>,
    /// Restricts every scene to one template instead of cycling.
    pub template: Option<TemplateKind>,
}

impl Default for TrackingSuite {
    fn default() -> Self {
        Self {
            model: ModelKind::Rvo,
            agents: 50,
            density: DensityClass::Medium,
            frames: DEFAULT_FRAMES,
            observation_sigma: 0.1,
            dropout: 0.0,
            occlusion: None,
            template: None,
        }
    }
}

/// One scene of a [`TrackingSuite`]: ground truth plus its observations.
#[derive(Debug, Clone)]
pub struct SuiteCase {
    pub seed: u64,
    pub generated: Generated,
    pub observations: TrajectoryDataset,
}

impl TrackingSuite {
    pub fn template(&self, seed: u64) -> ScenarioTemplate {
        let kind = self.template.unwrap_or(TemplateKind::ALL[seed as usize % TemplateKind::ALL.len()]);
        ScenarioTemplate::new(kind, self.agents, self.density, seed)
    }

    pub fn case(&self, seed: u64, constants: &ModelConstants) -> Result<SuiteCase> {
        let template = self.template(seed);
        let params = sample_template_params(&template, self.model, derive_seed(seed, &[0x5A]));
        let generated = generate(&template, self.model, &params, self.frames, constants)?;
        let mut observations =
            corrupt(&generated.ground_truth, self.observation_sigma, self.dropout, derive_seed(seed, &[0x0B5]))?;
        if let Some(o) = &self.occlusion {
            observations = o.apply(&observations, derive_seed(seed, &[0x0CC]))?;
        }
        Ok(SuiteCase { seed, generated, observations })
    }
}
