//! The tracking loop: a per-agent particle filter whose motion prior is the
//! periodically recalibrated mixture of motion models.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::confidence::{adapt_particle_count, confidence, Confidence, ConfidenceConfig};
use super::particles::{propagate, resample, reweight, NoiseModel, ParticleSet};
use crate::calibration::{calibrate, CalibrationResult, CalibrationSettings, GoalSource, Method, OptimizerSpec, PreparedCrowd};
use crate::dataset::{Record, SourceTag, TrajectoryDataset};
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::models::{ModelConstants, ModelKind, ModelParams};
use crate::rng::{derive_seed, substream};
use crate::scenario::Scenario;
use crate::state::{AgentId, AgentState, Snapshot, StateHistory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParticleCounts {
    pub n_min: usize,
    pub n_max: usize,
    /// When off, every set keeps `n_max` particles.
    pub adaptive: bool,
}

impl Default for ParticleCounts {
    fn default() -> Self {
        Self { n_min: 20, n_max: 200, adaptive: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerConfig {
    /// The window holds `k + 1` tracked states; the first `k` frames
    /// initialize it from the observations.
    pub k: usize,
    pub recalibrate_every: usize,
    pub calibration: CalibrationSettings,
    /// Skips model selection and uses this model for every agent.
    pub forced_model: Option<ModelKind>,
    /// Known per-agent parameters (for example from a provenance record);
    /// when set, calibration is skipped and these drive the prior.
    pub known_params: Option<ModelParams>,
    pub goal_source: GoalSource,
    pub noise: NoiseModel,
    pub particles: ParticleCounts,
    pub confidence: ConfidenceConfig,
    pub constants: ModelConstants,
    pub seed: u64,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            k: 10,
            recalibrate_every: 5,
            calibration: CalibrationSettings {
                optimizer: OptimizerSpec { max_evaluations: Some(60), ..OptimizerSpec::new(Method::Genetic, 20, 0) },
                context_rounds: 1,
                ..Default::default()
            },
            forced_model: None,
            known_params: None,
            goal_source: GoalSource::Scenario,
            noise: NoiseModel::default(),
            particles: ParticleCounts::default(),
            confidence: ConfidenceConfig::default(),
            constants: ModelConstants::default(),
            seed: 0,
            threads: None,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::InvalidInput("k must be at least 1".into()));
        }
        if self.recalibrate_every < 1 {
            return Err(Error::InvalidInput("recalibrate_every must be at least 1".into()));
        }
        let p = &self.particles;
        if p.n_min < 1 || p.n_min > p.n_max {
            return Err(Error::InvalidInput(format!("need 1 <= n_min <= n_max, got {} and {}", p.n_min, p.n_max)));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidInput("threads must be at least 1".into()));
        }
        self.noise.validate()?;
        self.confidence.validate()?;
        self.calibration.optimizer.validate()
    }

    fn settings(&self) -> CalibrationSettings {
        let mut s = self.calibration.clone();
        if let Some(kind) = self.forced_model {
            s.models = vec![kind];
        }
        s
    }
}

/// One row of the diagnostics file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRow {
    pub frame: u64,
    pub agent_id: AgentId,
    pub model: ModelKind,
    /// Particles propagated for this agent in this frame.
    pub particles: usize,
    pub pr: f64,
    pub mmr: f64,
    /// The agent's replay error under its model in the latest calibration.
    pub err: f64,
}

/// Calibration performed before tracking `frame`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub frame: u64,
    pub result: CalibrationResult,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct TrackStats {
    /// Frames run through the filter (after initialization).
    pub frames_tracked: usize,
    /// Largest |Σπ − 1| seen after any reweight.
    pub max_normalization_error: f64,
    /// Reweights where every likelihood underflowed.
    pub lost_events: usize,
}

#[derive(Debug, Clone)]
pub struct TrackOutput {
    pub estimates: TrajectoryDataset,
    pub diagnostics: Vec<DiagnosticRow>,
    pub calibrations: Vec<CalibrationRecord>,
    pub stats: TrackStats,
    /// Seconds spent in the loop, excluding input preparation.
    pub wall_time: f64,
    pub calibration_time: f64,
}

impl TrackOutput {
    pub fn mean_particles(&self) -> f64 {
        if self.diagnostics.is_empty() {
            return 0.0;
        }
        self.diagnostics.iter().map(|d| d.particles as f64).sum::<f64>() / self.diagnostics.len() as f64
    }

    pub fn steps_per_second(&self) -> f64 {
        self.stats.frames_tracked as f64 / self.wall_time.max(1e-12)
    }

    /// How often each model was in use, counted over diagnostic rows.
    pub fn model_frequencies(&self) -> BTreeMap<ModelKind, usize> {
        let mut out = BTreeMap::new();
        for d in &self.diagnostics {
            *out.entry(d.model).or_insert(0) += 1;
        }
        out
    }

    pub fn write_diagnostics_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["frame", "agent_id", "model", "particles", "pr", "mmr", "err"])?;
        for d in &self.diagnostics {
            w.write_record([
                d.frame.to_string(),
                d.agent_id.to_string(),
                d.model.name().to_string(),
                d.particles.to_string(),
                format!("{:?}", d.pr),
                format!("{:?}", d.mmr),
                format!("{:?}", d.err),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_diagnostics(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_diagnostics_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }
}

/// Reads a diagnostics CSV written by [`TrackOutput::write_diagnostics_csv`].
pub fn read_diagnostics(path: impl AsRef<Path>) -> Result<Vec<DiagnosticRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in r.records() {
        let row = row?;
        let field = |i: usize| row.get(i).ok_or_else(|| Error::Data(format!("diagnostics row has no column {i}")));
        let num = |i: usize| -> Result<f64> { field(i)?.parse().map_err(|_| Error::Data(format!("bad number in column {i}"))) };
        out.push(DiagnosticRow {
            frame: num(0)? as u64,
            agent_id: num(1)? as AgentId,
            model: field(2)?.parse()?,
            particles: num(3)? as usize,
            pr: num(4)?,
            mmr: num(5)?,
            err: num(6)?,
        });
    }
    Ok(out)
}

struct AgentStep {
    id: AgentId,
    set: ParticleSet,
    estimate: AgentState,
    row: DiagnosticRow,
    underflow: bool,
    normalization_error: f64,
}

/// Tracks every observed agent through `observations`.
///
/// The first `k` frames are taken verbatim (velocities by finite
/// differences). Each later frame recalibrates on cadence, then per agent:
/// propagate, reweight with the frame's observation (skipped while the
/// agent is unobserved), score confidence, adapt the particle count,
/// resample, and push the estimates into the window.
pub fn track(observations: &TrajectoryDataset, scenario: &Scenario, config: &TrackerConfig) -> Result<TrackOutput> {
    config.validate()?;
    scenario.validate()?;
    observations.validate()?;
    match config.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidInput(format!("cannot build thread pool: {e}")))?
            .install(|| run(observations, scenario, config)),
        None => run(observations, scenario, config),
    }
}

fn run(observations: &TrajectoryDataset, scenario: &Scenario, config: &TrackerConfig) -> Result<TrackOutput> {
    let (f0, f1) = observations.frame_range().ok_or_else(|| Error::Data("no observations".into()))?;
    let k = config.k;
    if f1 - f0 + 1 < k as u64 + 1 {
        return Err(Error::Data(format!("need at least {} frames, got {}", k + 1, f1 - f0 + 1)));
    }
    let dt = scenario.dt;
    let v_cap = config.constants.v_cap;
    let by_frame = observations.positions_by_frame();
    let velocities = observations.finite_difference_velocities().values;
    let mut last_seen: BTreeMap<AgentId, u64> = BTreeMap::new();
    for r in &observations.records {
        let e = last_seen.entry(r.agent_id).or_insert(r.frame);
        *e = (*e).max(r.frame);
    }
    let empty = BTreeMap::new();
    let settings = config.settings();
    let counts = config.particles;

    let started = Instant::now();
    let mut history = StateHistory::new(k, dt)?;
    let mut records = Vec::new();
    for f in f0..f0 + k as u64 {
        let agents: BTreeMap<AgentId, AgentState> = by_frame
            .get(&f)
            .unwrap_or(&empty)
            .iter()
            .map(|(&id, &p)| (id, AgentState::new(p, velocities.get(&(f, id)).copied().unwrap_or(Vec2::ZERO))))
            .collect();
        records.extend(agents.iter().map(|(&id, s)| Record::new(f, id, s.position).with_velocity(s.velocity)));
        history.push(Snapshot::new(f, agents))?;
    }

    let init_frame = f0 + k as u64 - 1;
    let mut sets: BTreeMap<AgentId, ParticleSet> = history
        .newest()
        .expect("window initialized")
        .agents
        .iter()
        .map(|(&id, s)| {
            let mut rng = substream(config.seed, &[0x1A, init_frame, id as u64]);
            (id, ParticleSet::around(id, *s, counts.n_max, config.noise.observation_sigma, &mut rng))
        })
        .collect();

    let known = config.known_params.clone().map(CalibrationResult::fixed);
    let mut result = known.clone().unwrap_or_else(CalibrationResult::constant_velocity);
    let mut calibrations = Vec::new();
    let mut calibration_time = 0.0;
    let mut diagnostics = Vec::new();
    let mut stats = TrackStats::default();

    for (step, f) in (f0 + k as u64..=f1).enumerate() {
        if known.is_none() && step % config.recalibrate_every == 0 && history.len() >= 2 && !history.persistent_agents().is_empty() {
            let mut s = settings.clone();
            s.optimizer.seed = derive_seed(config.seed, &[0xCA, f]);
            let previous = (!result.fits.is_empty()).then_some(&result);
            let t = Instant::now();
            let fresh = calibrate(&history, scenario, &s, &config.constants, previous)?;
            calibration_time += t.elapsed().as_secs_f64();
            calibrations.push(CalibrationRecord { frame: f, result: fresh.clone() });
            result = fresh;
        }

        sets.retain(|id, _| last_seen[id] >= f);
        let newest = history.newest().expect("window initialized");
        let current: BTreeMap<AgentId, AgentState> =
            sets.keys().filter_map(|id| newest.agents.get(id).map(|s| (*id, *s))).collect();
        let crowd = PreparedCrowd::new(&result, &current, scenario, &config.constants, config.goal_source);
        let predictor = crowd.predictor();
        let observed = by_frame.get(&f).unwrap_or(&empty);
        let tracks: BTreeMap<AgentId, Vec<Vec2>> = current
            .keys()
            .map(|&id| (id, history.snapshots().filter_map(|s| s.agents.get(&id).map(|a| a.position)).collect()))
            .collect();

        let jobs: Vec<(AgentId, ParticleSet)> = std::mem::take(&mut sets).into_iter().collect();
        let steps: Vec<Result<AgentStep>> = jobs
            .into_par_iter()
            .map(|(id, set)| {
                let mut rng = substream(config.seed, &[0x7F, f, id as u64]);
                let index = predictor.index_of(id).expect("every tracked agent is in the window");
                let model = crowd.kinds[index];
                let mut moved = propagate(&set, |s| predictor.predict(index, s), &config.noise, dt, v_cap, &mut rng);
                let observation = observed.get(&id);
                let mut underflow = false;
                let mut normalization_error = 0.0;
                if let Some(obs) = observation {
                    let r = reweight(&mut moved, *obs, &config.noise)?;
                    underflow = r.underflow;
                    normalization_error = r.normalization_error;
                }
                let estimate = moved.estimate().with_speed_cap(v_cap);
                let prediction = predictor.predict(index, &crowd.states[index]);
                let mut conf = confidence(&tracks[&id], estimate.position, prediction.position, dt, &config.confidence);
                if observation.is_none() {
                    conf = Confidence::new(conf.propagation * config.confidence.occlusion_penalty, conf.motion_model);
                }
                if underflow {
                    conf = Confidence::NONE;
                }
                let n = if counts.adaptive { adapt_particle_count(&conf, counts.n_min, counts.n_max) } else { counts.n_max };
                let err = result.fits.get(&model).and_then(|fit| fit.per_agent_error.get(&id)).copied().unwrap_or(0.0);
                let row = DiagnosticRow {
                    frame: f,
                    agent_id: id,
                    model,
                    particles: set.len(),
                    pr: conf.propagation,
                    mmr: conf.motion_model,
                    err,
                };
                Ok(AgentStep { id, set: resample(&moved, n, &mut rng), estimate, row, underflow, normalization_error })
            })
            .collect();

        let mut snapshot = BTreeMap::new();
        for s in steps {
            let s = s?;
            stats.lost_events += s.underflow as usize;
            stats.max_normalization_error = stats.max_normalization_error.max(s.normalization_error);
            diagnostics.push(s.row);
            snapshot.insert(s.id, s.estimate);
            sets.insert(s.id, s.set);
        }
        for (&id, &obs) in observed {
            if snapshot.contains_key(&id) {
                continue;
            }
            let mut rng = substream(config.seed, &[0x1B, f, id as u64]);
            let state = AgentState::new(obs, Vec2::ZERO);
            sets.insert(id, ParticleSet::around(id, state, counts.n_max, config.noise.observation_sigma, &mut rng));
            snapshot.insert(id, state);
            diagnostics.push(DiagnosticRow {
                frame: f,
                agent_id: id,
                model: ModelKind::Lin,
                particles: counts.n_max,
                pr: 0.0,
                mmr: 0.0,
                err: 0.0,
            });
        }
        records.extend(snapshot.iter().map(|(&id, s)| Record::new(f, id, s.position).with_velocity(s.velocity)));
        history.push(Snapshot::new(f, snapshot))?;
        stats.frames_tracked += 1;
    }

    records.sort_by_key(|r| (r.frame, r.agent_id));
    Ok(TrackOutput {
        estimates: TrajectoryDataset::new(records, 1.0 / dt, SourceTag::Estimate),
        diagnostics,
        calibrations,
        stats,
        wall_time: started.elapsed().as_secs_f64(),
        calibration_time,
    })
}
