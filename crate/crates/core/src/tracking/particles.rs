//! Weighted particle sets for one agent: propagation through the motion
//! prior, Gaussian reweighting, systematic resampling and point estimates.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::rng::Rng;
use crate::state::{AgentId, AgentState};

/// Standard deviations of the process noise Q and observation noise R, m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    pub process_sigma: f64,
    pub observation_sigma: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self { process_sigma: 0.05, observation_sigma: 0.1 }
    }
}

impl NoiseModel {
    pub fn new(process_sigma: f64, observation_sigma: f64) -> Self {
        Self { process_sigma, observation_sigma }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("process_sigma", self.process_sigma), ("observation_sigma", self.observation_sigma)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub state: AgentState,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    pub agent_id: AgentId,
    pub particles: Vec<Particle>,
}

impl ParticleSet {
    /// Equal-weight particles at `states`.
    pub fn from_states(agent_id: AgentId, states: impl IntoIterator<Item = AgentState>) -> Self {
        let mut particles: Vec<Particle> = states.into_iter().map(|state| Particle { state, weight: 1.0 }).collect();
        let w = 1.0 / particles.len().max(1) as f64;
        particles.iter_mut().for_each(|p| p.weight = w);
        Self { agent_id, particles }
    }

    /// `n` particles around `state` with isotropic position spread `sigma`.
    pub fn around(agent_id: AgentId, state: AgentState, n: usize, sigma: f64, rng: &mut Rng) -> Self {
        let states: Vec<AgentState> = (0..n)
            .map(|_| AgentState::new(state.position + gaussian2(rng, sigma), state.velocity))
            .collect();
        Self::from_states(agent_id, states)
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn weight_sum(&self) -> f64 {
        self.particles.iter().map(|p| p.weight).sum()
    }

    /// Weighted mean of particle states.
    pub fn estimate(&self) -> AgentState {
        let total = self.weight_sum();
        let (mut p, mut v) = (Vec2::ZERO, Vec2::ZERO);
        for q in &self.particles {
            p += q.state.position * q.weight;
            v += q.state.velocity * q.weight;
        }
        AgentState::new(p / total, v / total)
    }
}

fn gaussian2(rng: &mut Rng, sigma: f64) -> Vec2 {
    if sigma == 0.0 {
        return Vec2::ZERO;
    }
    let n = Normal::new(0.0, sigma).expect("sigma is finite and non-negative");
    Vec2::new(n.sample(rng), n.sample(rng))
}

/// Moves every particle through `prior`, adds position noise and sets the
/// particle's velocity to the finite difference of its own motion.
pub fn propagate(
    set: &ParticleSet,
    prior: impl Fn(&AgentState) -> AgentState,
    noise: &NoiseModel,
    dt: f64,
    v_cap: f64,
    rng: &mut Rng,
) -> ParticleSet {
    let particles = set
        .particles
        .iter()
        .map(|p| {
            let predicted = prior(&p.state);
            let position = predicted.position + gaussian2(rng, noise.process_sigma);
            let velocity = if noise.process_sigma == 0.0 { predicted.velocity } else { (position - p.state.position) / dt };
            Particle { state: AgentState::new(position, velocity).with_speed_cap(v_cap), weight: p.weight }
        })
        .collect();
    ParticleSet { agent_id: set.agent_id, particles }
}

/// Result of a measurement update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reweight {
    /// Every likelihood underflowed; weights were reset to uniform.
    pub underflow: bool,
    /// |Σπ − 1| after normalization.
    pub normalization_error: f64,
}

/// Multiplies weights by the Gaussian likelihood of `observation` and
/// renormalizes. A zero observation sigma keeps only the particles nearest
/// to the observation (the limit of the Gaussian).
pub fn reweight(set: &mut ParticleSet, observation: Vec2, noise: &NoiseModel) -> Result<Reweight> {
    if !observation.is_finite() {
        return Err(Error::InvalidInput(format!("observation must be finite, got {observation}")));
    }
    if set.is_empty() {
        return Ok(Reweight { underflow: false, normalization_error: 0.0 });
    }
    let d2: Vec<f64> = set.particles.iter().map(|p| p.state.position.distance_squared(observation)).collect();
    let d2_min = d2.iter().copied().fold(f64::INFINITY, f64::min);
    let sigma = noise.observation_sigma;
    let two_var = 2.0 * sigma * sigma;

    let underflow = sigma > 0.0 && (-d2_min / two_var).exp() == 0.0;
    if underflow {
        let w = 1.0 / set.len() as f64;
        set.particles.iter_mut().for_each(|p| p.weight = w);
    } else {
        // Shifting by the nearest distance leaves likelihood ratios unchanged.
        for (p, &d) in set.particles.iter_mut().zip(&d2) {
            let l = if sigma > 0.0 {
                (-(d - d2_min) / two_var).exp()
            } else if d <= d2_min {
                1.0
            } else {
                0.0
            };
            p.weight *= l;
        }
        let total = set.weight_sum();
        if total > 0.0 && total.is_finite() {
            set.particles.iter_mut().for_each(|p| p.weight /= total);
        } else {
            let w = 1.0 / set.len() as f64;
            set.particles.iter_mut().for_each(|p| p.weight = w);
        }
    }
    Ok(Reweight { underflow, normalization_error: (set.weight_sum() - 1.0).abs() })
}

/// Systematic resampling to `target` equally weighted particles.
pub fn resample(set: &ParticleSet, target: usize, rng: &mut Rng) -> ParticleSet {
    if set.is_empty() || target == 0 {
        return ParticleSet { agent_id: set.agent_id, particles: Vec::new() };
    }
    let total = set.weight_sum();
    let step = total / target as f64;
    let mut u = rng.random::<f64>() * step;
    let mut out = Vec::with_capacity(target);
    let mut cumulative = set.particles[0].weight;
    let mut i = 0;
    let w = 1.0 / target as f64;
    for _ in 0..target {
        while u > cumulative && i + 1 < set.len() {
            i += 1;
            cumulative += set.particles[i].weight;
        }
        out.push(Particle { state: set.particles[i].state, weight: w });
        u += step;
    }
    ParticleSet { agent_id: set.agent_id, particles: out }
}

/// Offspring count of every input particle after `resample`.
pub fn offspring_counts(set: &ParticleSet, resampled: &ParticleSet) -> Vec<usize> {
    let mut counts = vec![0; set.len()];
    let mut i = 0;
    for p in &resampled.particles {
        while set.particles[i].state != p.state {
            i += 1;
        }
        counts[i] += 1;
    }
    counts
}
