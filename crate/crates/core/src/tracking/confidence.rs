//! Tracker confidence and the particle count it implies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::state::DEFAULT_V_CAP;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConfidenceConfig {
    /// Speed that maps a drift to zero propagation reliability, m/s.
    pub drift_speed: f64,
    /// Prediction residual that maps to zero motion-model reliability, m.
    pub d_max: f64,
    /// Factor applied to the propagation reliability of an unobserved agent.
    pub occlusion_penalty: f64,
}

impl Default for ConfidenceConfig {
    fn default() -> Self {
        Self { drift_speed: DEFAULT_V_CAP, d_max: 0.8, occlusion_penalty: 0.5 }
    }
}

impl ConfidenceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.drift_speed > 0.0 && self.d_max > 0.0) {
            return Err(Error::InvalidInput("drift_speed and d_max must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.occlusion_penalty) {
            return Err(Error::InvalidInput("occlusion_penalty must be in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Confidence {
    pub propagation: f64,
    pub motion_model: f64,
    pub combined: f64,
}

impl Confidence {
    pub fn new(propagation: f64, motion_model: f64) -> Self {
        let (pr, mmr) = (propagation.clamp(0.0, 1.0), motion_model.clamp(0.0, 1.0));
        Self { propagation: pr, motion_model: mmr, combined: pr * mmr }
    }

    /// No confidence at all; maps to the largest particle count.
    pub const NONE: Confidence = Confidence { propagation: 0.0, motion_model: 0.0, combined: 0.0 };
}

/// Drift plausibility `g(a, b)` of a step of length `a` after a total drift
/// `b` over `steps` frames.
pub fn propagation_reliability(a: f64, b: f64, steps: usize, dt: f64, cfg: &ConfidenceConfig) -> f64 {
    let reach = cfg.drift_speed * dt;
    let step = (1.0 - a / reach).clamp(0.0, 1.0);
    let total = (1.0 - b / (reach * steps.max(1) as f64)).clamp(0.0, 1.0);
    step * total
}

/// Linear reliability of a model prediction that missed by `residual` meters.
pub fn motion_model_reliability(residual: f64, cfg: &ConfidenceConfig) -> f64 {
    (1.0 - residual / cfg.d_max).clamp(0.0, 1.0)
}

/// Confidence in the newest estimate given the agent's tracked positions in
/// the window (oldest first, excluding the estimate) and the model's
/// prediction for this frame.
pub fn confidence(window: &[Vec2], estimate: Vec2, prediction: Vec2, dt: f64, cfg: &ConfidenceConfig) -> Confidence {
    let (Some(first), Some(last)) = (window.first(), window.last()) else {
        return Confidence::new(1.0, motion_model_reliability(estimate.distance(prediction), cfg));
    };
    let pr = propagation_reliability(estimate.distance(*last), estimate.distance(*first), window.len(), dt, cfg);
    Confidence::new(pr, motion_model_reliability(estimate.distance(prediction), cfg))
}

/// `round(n_max − c · (n_max − n_min))`, clamped to `[n_min, n_max]`.
pub fn adapt_particle_count(conf: &Confidence, n_min: usize, n_max: usize) -> usize {
    let c = conf.combined.clamp(0.0, 1.0);
    let n = (n_max as f64 - c * (n_max as f64 - n_min as f64)).round() as usize;
    n.clamp(n_min, n_max)
}
