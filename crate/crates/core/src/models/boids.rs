//! Boids steering: separation, alignment and cohesion within a fixed
//! neighborhood, plus attraction toward the goal.
//!
//! Separation looks ahead: two agents repel when their closest approach
//! within the lookahead time falls below the sum of their radii.

use smallvec::SmallVec;
use crate::geometry::{clamp_length, Segment, Vec2};
use crate::models::{preferred_velocity, AgentParams, CrowdView, ModelConstants};
use crate::state::AgentState;

#[derive(Debug, Clone, Copy)]
pub struct BoidsNeighbor {
    pub state: AgentState,
    pub radius: f64,
}

/// Acceleration components, m/s².
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BoidsForces {
    pub separation: Vec2,
    pub alignment: Vec2,
    pub cohesion: Vec2,
    pub goal: Vec2,
    pub obstacle: Vec2,
}

impl BoidsForces {
    pub fn total(&self) -> Vec2 {
        self.separation + self.alignment + self.cohesion + self.goal + self.obstacle
    }
}

/// Steering of one agent given the neighbors inside its neighborhood.
pub fn boids_step_forces(
    agent: &AgentState,
    neighbors: &[BoidsNeighbor],
    obstacles: &[Segment],
    goal: Vec2,
    params: &AgentParams,
    constants: &ModelConstants,
    dt: f64,
) -> BoidsForces {
    let c = constants;
    let v_pref = preferred_velocity(agent.position, goal, params.comfort_speed, dt);
    let mut forces = BoidsForces { goal: (v_pref - agent.velocity) * c.boids_goal, ..Default::default() };
    if !neighbors.is_empty() {
        let mut mean_velocity = Vec2::ZERO;
        let mut centroid = Vec2::ZERO;
        for n in neighbors {
            mean_velocity += n.state.velocity;
            centroid += n.state.position;
            if let Some(push) = separation(agent, params.radius, n, c.boids_lookahead) {
                forces.separation += push * (c.boids_separation * params.comfort_speed);
            }
        }
        let count = neighbors.len() as f64;
        forces.alignment = (mean_velocity / count - agent.velocity) * c.boids_alignment;
        forces.cohesion = (centroid / count - agent.position)
            * (c.boids_cohesion * params.comfort_speed / c.boids_neighbor_radius);
    }
    for seg in obstacles {
        let (closest, _) = seg.closest_point(agent.position);
        let away = agent.position - closest;
        let dist = away.length();
        let clearance = 2.0 * params.radius;
        if dist < clearance {
            let dir = if dist > 1e-12 { away / dist } else { Vec2::X };
            forces.obstacle += dir * (c.boids_separation * params.comfort_speed * (clearance - dist) / clearance);
        }
    }
    forces
}

/// Unit push direction scaled by penetration fraction, if the pair's closest
/// approach within `lookahead` seconds is closer than the summed radii.
fn separation(agent: &AgentState, radius: f64, other: &BoidsNeighbor, lookahead: f64) -> Option<Vec2> {
    let rel_p = agent.position - other.state.position;
    let rel_v = agent.velocity - other.state.velocity;
    let speed_sq = rel_v.length_squared();
    let t = if speed_sq > 1e-12 { (-rel_p.dot(rel_v) / speed_sq).clamp(0.0, lookahead) } else { 0.0 };
    let at_closest = rel_p + rel_v * t;
    let dist = at_closest.length();
    let combined = radius + other.radius;
    if dist >= combined {
        return None;
    }
    let dir = if dist > 1e-9 {
        at_closest / dist
    } else if rel_p.length_squared() > 1e-18 {
        rel_p.normalize()
    } else {
        Vec2::X
    };
    Some(dir * ((combined - dist) / combined))
}

pub(crate) fn advance(index: usize, state: &AgentState, params: &AgentParams, view: &CrowdView<'_>) -> AgentState {
    let neighbors: SmallVec<[BoidsNeighbor; 16]> = view.with_neighbors(state.position, view.constants.boids_neighbor_radius, index, |ids| {
        ids.iter().map(|&j| BoidsNeighbor { state: view.states[j], radius: view.params[j].radius }).collect()
    });
    let accel = boids_step_forces(state, &neighbors, view.obstacles, view.goals[index], params, view.constants, view.dt).total();
    let velocity = clamp_length(state.velocity + accel * view.dt, params.comfort_speed);
    AgentState::new(state.position + velocity * view.dt, velocity)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ModelKind;

    fn params() -> AgentParams {
        AgentParams::mean(ModelKind::Boids)
    }

    #[test]
    fn isolated_agent_only_feels_the_goal() {
        let agent = AgentState::new(Vec2::ZERO, Vec2::new(0.2, 0.1));
        let f = boids_step_forces(&agent, &[], &[], Vec2::new(10.0, 0.0), &params(), &ModelConstants::default(), 0.1);
        assert_eq!(f.total(), f.goal);
        assert_eq!(f.goal, Vec2::new(1.5, 0.0) - agent.velocity);
    }

    #[test]
    fn separation_pushes_away_from_predicted_contact() {
        let agent = AgentState::new(Vec2::ZERO, Vec2::new(1.0, 0.0));
        let other = BoidsNeighbor { state: AgentState::new(Vec2::new(1.5, 0.3), Vec2::new(-1.0, 0.0)), radius: 0.3 };
        let f = boids_step_forces(&agent, &[other], &[], Vec2::new(10.0, 0.0), &params(), &ModelConstants::default(), 0.1);
        // Direct evaluation: closest approach at t = 0.75 s, separation 0.3 m < 0.6 m.
        let expected_dir = Vec2::new(0.0, -1.0);
        let expected = expected_dir * (0.5 * 2.0 * 1.5);
        assert!((f.separation - expected).length() < 1e-12, "{:?}", f.separation);
        assert!(f.separation.dot(agent.position - other.state.position) > 0.0);
    }

    #[test]
    fn symmetric_ring_moving_in_step_has_no_alignment_or_cohesion() {
        let v = Vec2::new(0.7, -0.2);
        let agent = AgentState::new(Vec2::new(1.0, 1.0), v);
        let ring: Vec<BoidsNeighbor> = (0..6)
            .map(|i| {
                let a = i as f64 * std::f64::consts::TAU / 6.0;
                BoidsNeighbor { state: AgentState::new(agent.position + Vec2::new(a.cos(), a.sin()) * 3.0, v), radius: 0.3 }
            })
            .collect();
        let f = boids_step_forces(&agent, &ring, &[], Vec2::new(10.0, 0.0), &params(), &ModelConstants::default(), 0.1);
        assert!(f.alignment.length() < 1e-12);
        assert!(f.cohesion.length() < 1e-12);
        assert_eq!(f.separation, Vec2::ZERO);
    }

    #[test]
    fn obstacle_repels_through_nearest_point() {
        let agent = AgentState::new(Vec2::new(0.0, 0.4), Vec2::ZERO);
        let wall = Segment::new(Vec2::new(-5.0, 0.0), Vec2::new(5.0, 0.0));
        let f = boids_step_forces(&agent, &[], &[wall], Vec2::new(0.0, 10.0), &params(), &ModelConstants::default(), 0.1);
        assert!(f.obstacle.y > 0.0 && f.obstacle.x.abs() < 1e-12);
    }
}
