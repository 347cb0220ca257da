//! Ground-space multi-agent trajectory tracking with a mixture of crowd
//! motion models.
//!
//! The pipeline keeps a sliding window of tracked states, periodically fits
//! the parameters of several crowd-simulation models (constant velocity,
//! Boids, Social Forces, ORCA) to that window, selects the best-fitting model,
//! and uses it as the motion prior of a per-agent particle filter whose
//! particle count adapts to tracker confidence.
//!
//! Modules:
//! - [`state`], [`scenario`], [`dataset`]: domain types and file formats.
//! - [`models`]: the parameterized motion models.
//! - [`calibration`]: replay error, optimizers and model selection.
//! - [`tracking`]: particle filter, confidence and the tracking loop.
//! - [`evaluation`]: CLEAR MOT, successful tracks and RMS error.
//! - [`synthesis`]: synthetic ground truth and observation corruption.

pub mod calibration;
pub mod config;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod models;
pub mod rng;
pub mod scenario;
pub mod state;
pub mod synthesis;
pub mod tracking;

pub use error::{Error, Result};
pub use geometry::Vec2;
pub use state::{AgentId, AgentState, Snapshot, StateHistory};
