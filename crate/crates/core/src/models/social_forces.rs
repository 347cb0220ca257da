//! Social Forces: personal motivation, exponential social repulsion and
//! contact forces, integrated with semi-implicit Euler.

use smallvec::SmallVec;
use crate::geometry::{clamp_length, Segment, Vec2};
use crate::models::{preferred_velocity, AgentParams, CrowdView, ModelConstants};
use crate::state::AgentState;

#[derive(Debug, Clone, Copy)]
pub struct SocialNeighbor {
    pub state: AgentState,
    pub radius: f64,
}

/// Force components per unit mass, m/s².
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SocialForces {
    pub motivation: Vec2,
    pub social: Vec2,
    pub physical: Vec2,
}

impl SocialForces {
    pub fn net(&self) -> Vec2 {
        self.motivation + self.social + self.physical
    }
}

pub fn social_forces_net(
    agent: &AgentState,
    neighbors: &[SocialNeighbor],
    obstacles: &[Segment],
    goal: Vec2,
    params: &AgentParams,
    constants: &ModelConstants,
    dt: f64,
) -> SocialForces {
    let c = constants;
    let v_pref = preferred_velocity(agent.position, goal, params.comfort_speed, dt);
    let mut f = SocialForces { motivation: (v_pref - agent.velocity) / c.relaxation_time, ..Default::default() };
    for n in neighbors {
        let (dir, dist) = direction(agent.position - n.state.position);
        let reach = params.radius + n.radius;
        let magnitude = (c.repulsion_strength * ((reach - dist) / c.repulsion_range).exp()).min(c.max_pair_force);
        f.social += dir * magnitude;
        if dist < reach {
            f.physical += dir * (c.contact_stiffness * (reach - dist));
        }
    }
    for seg in obstacles {
        let (closest, _) = seg.closest_point(agent.position);
        let (dir, dist) = direction(agent.position - closest);
        let magnitude = (c.repulsion_strength * ((params.radius - dist) / c.repulsion_range).exp()).min(c.max_pair_force);
        f.social += dir * magnitude;
        if dist < params.radius {
            f.physical += dir * (c.contact_stiffness * (params.radius - dist));
        }
    }
    f
}

/// Unit vector and length; coincident points resolve to +x.
fn direction(v: Vec2) -> (Vec2, f64) {
    let len = v.length();
    if len > 1e-12 {
        (v / len, len)
    } else {
        (Vec2::X, 0.0)
    }
}

pub(crate) fn advance(index: usize, state: &AgentState, params: &AgentParams, view: &CrowdView<'_>) -> AgentState {
    let neighbors: SmallVec<[SocialNeighbor; 16]> = view.with_neighbors(state.position, view.constants.social_cutoff, index, |ids| {
        ids.iter().map(|&j| SocialNeighbor { state: view.states[j], radius: view.params[j].radius }).collect()
    });
    let force = social_forces_net(state, &neighbors, view.obstacles, view.goals[index], params, view.constants, view.dt).net();
    let velocity = clamp_length(state.velocity + force * view.dt, params.comfort_speed);
    AgentState::new(state.position + velocity * view.dt, velocity)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ModelKind;

    fn params(comfort: f64) -> AgentParams {
        AgentParams { comfort_speed: comfort, ..AgentParams::mean(ModelKind::SocialForces) }
    }

    #[test]
    fn satisfied_isolated_agent_feels_nothing() {
        let agent = AgentState::new(Vec2::ZERO, Vec2::new(1.5, 0.0));
        let f = social_forces_net(&agent, &[], &[], Vec2::new(20.0, 0.0), &params(1.5), &ModelConstants::default(), 0.04);
        assert_eq!(f.net(), Vec2::ZERO);
    }

    #[test]
    fn agent_at_rest_accelerates_toward_goal() {
        let agent = AgentState::new(Vec2::ZERO, Vec2::ZERO);
        let f = social_forces_net(&agent, &[], &[], Vec2::new(20.0, 0.0), &params(1.5), &ModelConstants::default(), 0.04);
        assert!((f.net() - Vec2::new(3.0, 0.0)).length() < 1e-12);
    }

    #[test]
    fn overlapping_agents_get_repulsive_contact_force() {
        let agent = AgentState::new(Vec2::ZERO, Vec2::ZERO);
        let other = SocialNeighbor { state: AgentState::new(Vec2::new(0.4, 0.1), Vec2::ZERO), radius: 0.3 };
        let c = ModelConstants::default();
        let f = social_forces_net(&agent, &[other], &[], Vec2::new(20.0, 0.0), &params(1.5), &c, 0.04);
        let sep = agent.position - other.state.position;
        let dist = sep.length();
        let expected = sep / dist * (c.contact_stiffness * (0.6 - dist));
        assert!((f.physical - expected).length() < 1e-12);
        assert!(f.physical.dot(sep) > 0.0);
        assert!(f.social.dot(sep) > 0.0);
    }

    #[test]
    fn coincident_agents_break_ties_along_x_with_capped_magnitude() {
        let agent = AgentState::new(Vec2::ONE, Vec2::ZERO);
        let other = SocialNeighbor { state: agent, radius: 1.0 };
        let c = ModelConstants::default();
        let p = AgentParams { radius: 1.0, ..params(1.5) };
        let f = social_forces_net(&agent, &[other], &[], Vec2::new(20.0, 1.0), &p, &c, 0.04);
        assert_eq!(f.social, Vec2::new(c.max_pair_force, 0.0));
        assert!(f.physical.x > 0.0 && f.physical.y == 0.0);
    }
}
