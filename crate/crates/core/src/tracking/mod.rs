//! Particle-filter tracking with the mixture motion prior and adaptive
//! particle counts.

pub mod confidence;
pub mod particles;
pub mod tracker;

pub use confidence::{adapt_particle_count, confidence, Confidence, ConfidenceConfig};
pub use particles::{propagate, resample, reweight, NoiseModel, Particle, ParticleSet, Reweight};
pub use tracker::{read_diagnostics, track, CalibrationRecord, DiagnosticRow, ParticleCounts, TrackOutput, TrackStats, TrackerConfig};
