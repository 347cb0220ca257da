//! Constant-velocity model.

use crate::state::AgentState;

pub fn advance(state: &AgentState, dt: f64) -> AgentState {
    AgentState::new(state.position + state.velocity * dt, state.velocity)
}
