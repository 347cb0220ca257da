//! The run configuration shared by every command: one JSON document with a
//! `version` field. Missing keys take their defaults; unknown keys are
//! rejected so that typos surface as validation errors.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::calibration::{CalibrationSettings, GoalSource, OptimizerSpec, SelectionMode};
use crate::error::{Error, Result};
use crate::evaluation::MatchConfig;
use crate::models::{ModelConstants, ModelKind};
use crate::synthesis::{DensityClass, OcclusionModel, DEFAULT_FRAMES};
use crate::tracking::{ConfidenceConfig, NoiseModel, ParticleCounts, TrackerConfig};

pub const CONFIG_VERSION: u32 = 1;

/// Settings for generating synthetic suites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSettings {
    pub frames: usize,
    pub density: DensityClass,
    /// Standard deviation of the observation noise added to ground truth, m.
    pub observation_sigma: f64,
    /// Probability that an individual observation is dropped.
    pub dropout: f64,
    /// Long occlusion runs; none by default.
    pub occlusion: Option<OcclusionModel>,
}

impl Default for SynthSettings {
    fn default() -> Self {
        Self { frames: DEFAULT_FRAMES, density: DensityClass::Medium, observation_sigma: 0.1, dropout: 0.0, occlusion: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub seed: u64,
    /// Number of past states kept besides the newest.
    pub k: usize,
    pub recalibrate_every: usize,
    pub optimizer: OptimizerSpec,
    pub mode: SelectionMode,
    pub forced_model: Option<ModelKind>,
    /// Per-agent fitting rounds against refreshed neighbor parameters.
    pub context_rounds: usize,
    pub goal_source: GoalSource,
    pub noise: NoiseModel,
    pub particles: ParticleCounts,
    pub confidence: ConfidenceConfig,
    #[serde(rename = "model_constants")]
    pub constants: ModelConstants,
    pub matching: MatchConfig,
    pub synth: SynthSettings,
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::from_tracker(&TrackerConfig::default())
    }
}

impl RunConfig {
    fn from_tracker(t: &TrackerConfig) -> Self {
        Self {
            version: CONFIG_VERSION,
            seed: t.seed,
            k: t.k,
            recalibrate_every: t.recalibrate_every,
            optimizer: t.calibration.optimizer.clone(),
            mode: t.calibration.mode,
            forced_model: t.forced_model,
            context_rounds: t.calibration.context_rounds,
            goal_source: t.goal_source,
            noise: t.noise,
            particles: t.particles,
            confidence: t.confidence,
            constants: t.constants,
            matching: MatchConfig::default(),
            synth: SynthSettings::default(),
            threads: t.threads,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("bad configuration: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidInput(format!("cannot read configuration {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported configuration version {} (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if self.context_rounds < 1 {
            return Err(Error::InvalidInput("context_rounds must be at least 1".into()));
        }
        let s = &self.synth;
        if s.frames < 2 {
            return Err(Error::InvalidInput("synth.frames must be at least 2".into()));
        }
        if !(s.observation_sigma >= 0.0 && s.observation_sigma.is_finite()) {
            return Err(Error::InvalidInput("synth.observation_sigma must be non-negative".into()));
        }
        if !(0.0..1.0).contains(&s.dropout) {
            return Err(Error::InvalidInput("synth.dropout must be in [0, 1)".into()));
        }
        if let Some(o) = &s.occlusion {
            o.validate()?;
        }
        self.matching.validate()?;
        self.constants.validate()?;
        self.tracker().validate()
    }

    pub fn calibration(&self) -> CalibrationSettings {
        let mut optimizer = self.optimizer.clone();
        optimizer.seed = self.seed;
        CalibrationSettings { optimizer, mode: self.mode, context_rounds: self.context_rounds, ..Default::default() }
    }

    pub fn tracker(&self) -> TrackerConfig {
        TrackerConfig {
            k: self.k,
            recalibrate_every: self.recalibrate_every,
            calibration: self.calibration(),
            forced_model: self.forced_model,
            known_params: None,
            goal_source: self.goal_source,
            noise: self.noise,
            particles: self.particles,
            confidence: self.confidence,
            constants: self.constants,
            seed: self.seed,
            threads: self.threads,
        }
    }
}
