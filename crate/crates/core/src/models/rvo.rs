//! ORCA (optimal reciprocal collision avoidance).
//!
//! Each neighbor contributes a half-plane of permitted velocities; the new
//! velocity is the point of the intersection (clipped to the max-speed disc)
//! closest to the preferred velocity, found by incremental 2D linear
//! programming. When the half-planes have no common point, the velocity that
//! minimizes the largest violation of the agent constraints is used instead,
//! while obstacle constraints stay hard.

use smallvec::SmallVec;
use crate::geometry::{det, Segment, Vec2};
use crate::models::{preferred_velocity, AgentParams, CrowdView};
use crate::state::AgentState;

const EPSILON: f64 = 1e-9;

/// Half-plane `{ v : det(direction, point − v) ≤ 0 }`, i.e. the permitted side
/// lies to the left of `direction`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrcaLine {
    pub point: Vec2,
    pub direction: Vec2,
}

impl OrcaLine {
    /// The half-plane `normal · v ≤ offset` for a unit `normal`.
    pub fn from_normal(normal: Vec2, offset: f64) -> Self {
        Self { point: normal * offset, direction: Vec2::new(-normal.y, normal.x) }
    }

    /// Positive when `v` lies outside the half-plane (by that distance).
    pub fn violation(&self, v: Vec2) -> f64 {
        det(self.direction, self.point - v)
    }

    pub fn contains(&self, v: Vec2) -> bool {
        self.violation(v) <= EPSILON
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RvoNeighbor {
    pub state: AgentState,
    pub radius: f64,
}

/// Reciprocal half-plane for one neighbor (each agent takes half the avoidance).
pub fn agent_orca_line(
    agent: &AgentState,
    radius: f64,
    other: &RvoNeighbor,
    time_horizon: f64,
    dt: f64,
) -> OrcaLine {
    let rel_pos = other.state.position - agent.position;
    let rel_vel = agent.velocity - other.state.velocity;
    let dist_sq = rel_pos.length_squared();
    let combined = radius + other.radius;
    let combined_sq = combined * combined;
    let inv_horizon = 1.0 / time_horizon;

    let (direction, u) = if dist_sq > combined_sq {
        let w = rel_vel - rel_pos * inv_horizon;
        let w_len_sq = w.length_squared();
        let dot1 = w.dot(rel_pos);
        if dot1 < 0.0 && dot1 * dot1 > combined_sq * w_len_sq {
            // Project on the cut-off circle.
            let w_len = w_len_sq.sqrt();
            let unit_w = w / w_len;
            (Vec2::new(unit_w.y, -unit_w.x), unit_w * (combined * inv_horizon - w_len))
        } else {
            // Project on the nearer leg.
            let leg = (dist_sq - combined_sq).sqrt();
            let direction = if det(rel_pos, w) > 0.0 {
                Vec2::new(rel_pos.x * leg - rel_pos.y * combined, rel_pos.x * combined + rel_pos.y * leg) / dist_sq
            } else {
                -Vec2::new(rel_pos.x * leg + rel_pos.y * combined, -rel_pos.x * combined + rel_pos.y * leg) / dist_sq
            };
            (direction, direction * rel_vel.dot(direction) - rel_vel)
        }
    } else {
        // Already overlapping: resolve within one timestep.
        let inv_dt = 1.0 / dt;
        let w = rel_vel - rel_pos * inv_dt;
        let w_len = w.length();
        let unit_w = if w_len > EPSILON { w / w_len } else { -safe_unit(rel_pos) };
        (Vec2::new(unit_w.y, -unit_w.x), unit_w * (combined * inv_dt - w_len))
    };
    OrcaLine { point: agent.velocity + u * 0.5, direction }
}

/// Half-plane keeping the agent clear of a static segment for `time_horizon`
/// seconds. Interior contacts act like a wall; endpoint contacts like a
/// static disc of zero radius.
pub fn obstacle_orca_line(
    agent: &AgentState,
    radius: f64,
    segment: &Segment,
    time_horizon: f64,
    dt: f64,
) -> Option<OrcaLine> {
    let (closest, t) = segment.closest_point(agent.position);
    let rel_pos = closest - agent.position;
    let dist = rel_pos.length();
    if dist < radius {
        let normal = if dist > EPSILON { rel_pos / dist } else { wall_normal(segment, agent.velocity) };
        return Some(OrcaLine::from_normal(normal, (dist - radius) / dt));
    }
    if t > 0.0 && t < 1.0 {
        return Some(OrcaLine::from_normal(rel_pos / dist, (dist - radius) / time_horizon));
    }
    // Endpoint: full-responsibility velocity obstacle of a static point.
    let static_point = RvoNeighbor { state: AgentState::new(closest, Vec2::ZERO), radius: 0.0 };
    let mut line = agent_orca_line(agent, radius, &static_point, time_horizon, dt);
    line.point = agent.velocity + (line.point - agent.velocity) * 2.0;
    Some(line)
}

fn safe_unit(v: Vec2) -> Vec2 {
    let len = v.length();
    if len > EPSILON {
        v / len
    } else {
        Vec2::X
    }
}

fn wall_normal(segment: &Segment, velocity: Vec2) -> Vec2 {
    let along = safe_unit(segment.b - segment.a);
    let n = Vec2::new(-along.y, along.x);
    if n.dot(velocity) >= 0.0 {
        n
    } else {
        -n
    }
}

/// Solves on line `line_no` subject to lines `0..line_no` and the speed disc.
fn linear_program1(lines: &[OrcaLine], line_no: usize, radius: f64, opt: Vec2, direction_opt: bool, result: &mut Vec2) -> bool {
    let line = lines[line_no];
    let dot = line.point.dot(line.direction);
    let discriminant = dot * dot + radius * radius - line.point.length_squared();
    if discriminant < 0.0 {
        return false;
    }
    let sqrt_disc = discriminant.sqrt();
    let mut t_left = -dot - sqrt_disc;
    let mut t_right = -dot + sqrt_disc;
    for prev in &lines[..line_no] {
        let denominator = det(line.direction, prev.direction);
        let numerator = det(prev.direction, line.point - prev.point);
        if denominator.abs() <= EPSILON {
            if numerator < 0.0 {
                return false;
            }
            continue;
        }
        let t = numerator / denominator;
        if denominator >= 0.0 {
            t_right = t_right.min(t);
        } else {
            t_left = t_left.max(t);
        }
        if t_left > t_right {
            return false;
        }
    }
    *result = if direction_opt {
        if opt.dot(line.direction) > 0.0 {
            line.point + line.direction * t_right
        } else {
            line.point + line.direction * t_left
        }
    } else {
        let t = line.direction.dot(opt - line.point);
        line.point + line.direction * t.clamp(t_left, t_right)
    };
    true
}

/// Returns the index of the first line that could not be satisfied, or
/// `lines.len()` on success.
fn linear_program2(lines: &[OrcaLine], radius: f64, opt: Vec2, direction_opt: bool, result: &mut Vec2) -> usize {
    *result = if direction_opt {
        opt * radius
    } else if opt.length_squared() > radius * radius {
        opt.normalize() * radius
    } else {
        opt
    };
    for i in 0..lines.len() {
        if lines[i].violation(*result) > 0.0 {
            let previous = *result;
            if !linear_program1(lines, i, radius, opt, direction_opt, result) {
                *result = previous;
                return i;
            }
        }
    }
    lines.len()
}

/// Least-penetration fallback over lines `begin..`, keeping the first
/// `num_hard` lines as hard constraints.
fn linear_program3(lines: &[OrcaLine], num_hard: usize, begin: usize, radius: f64, result: &mut Vec2) {
    let mut distance = 0.0;
    let mut projected: Vec<OrcaLine> = Vec::with_capacity(lines.len());
    for i in begin..lines.len() {
        if lines[i].violation(*result) > distance {
            projected.clear();
            projected.extend_from_slice(&lines[..num_hard]);
            for j in num_hard..i {
                let determinant = det(lines[i].direction, lines[j].direction);
                let point = if determinant.abs() <= EPSILON {
                    if lines[i].direction.dot(lines[j].direction) > 0.0 {
                        continue;
                    }
                    (lines[i].point + lines[j].point) * 0.5
                } else {
                    lines[i].point
                        + lines[i].direction * (det(lines[j].direction, lines[i].point - lines[j].point) / determinant)
                };
                let direction = (lines[j].direction - lines[i].direction).normalize_or_zero();
                projected.push(OrcaLine { point, direction });
            }
            let previous = *result;
            let opt = Vec2::new(-lines[i].direction.y, lines[i].direction.x);
            if linear_program2(&projected, radius, opt, true, result) < projected.len() {
                *result = previous;
            }
            distance = lines[i].violation(*result);
        }
    }
}

/// The velocity closest to `v_pref` satisfying every half-plane and
/// `|v| ≤ max_speed`. The first `num_hard` lines are never relaxed.
pub fn solve_velocity(lines: &[OrcaLine], num_hard: usize, max_speed: f64, v_pref: Vec2) -> Vec2 {
    let mut result = Vec2::ZERO;
    let failed = linear_program2(lines, max_speed, v_pref, false, &mut result);
    if failed < lines.len() {
        linear_program3(lines, num_hard, failed, max_speed, &mut result);
    }
    result
}

/// New velocity of one agent from its ORCA constraints.
pub fn rvo_new_velocity(
    agent: &AgentState,
    neighbors: &[RvoNeighbor],
    obstacles: &[Segment],
    params: &AgentParams,
    v_pref: Vec2,
    dt: f64,
) -> Vec2 {
    let mut lines: SmallVec<[OrcaLine; 24]> = SmallVec::new();
    for seg in obstacles {
        let reach = params.obstacle_time_horizon * params.comfort_speed + params.radius;
        if seg.closest_point(agent.position).0.distance(agent.position) <= reach {
            lines.extend(obstacle_orca_line(agent, params.radius, seg, params.obstacle_time_horizon, dt));
        }
    }
    let num_hard = lines.len();
    lines.extend(neighbors.iter().map(|n| agent_orca_line(agent, params.radius, n, params.agent_time_horizon, dt)));
    solve_velocity(&lines, num_hard, params.comfort_speed, v_pref)
}

pub(crate) fn advance(index: usize, state: &AgentState, params: &AgentParams, view: &CrowdView<'_>) -> AgentState {
    let neighbors: SmallVec<[RvoNeighbor; 16]> = view.with_neighbors(state.position, params.neighbor_distance, index, |ids| {
        ids.iter().map(|&j| RvoNeighbor { state: view.states[j], radius: view.params[j].radius }).collect()
    });
    let v_pref = preferred_velocity(state.position, view.goals[index], params.comfort_speed, view.dt);
    let velocity = rvo_new_velocity(state, &neighbors, view.obstacles, params, v_pref, view.dt);
    AgentState::new(state.position + velocity * view.dt, velocity)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ModelKind;

    fn params() -> AgentParams {
        AgentParams::mean(ModelKind::Rvo)
    }

    #[test]
    fn unconstrained_agent_keeps_preferred_velocity() {
        let agent = AgentState::new(Vec2::ZERO, Vec2::new(0.3, 0.0));
        let v_pref = Vec2::new(1.2, -0.4);
        assert_eq!(rvo_new_velocity(&agent, &[], &[], &params(), v_pref, 0.1), v_pref);
    }

    #[test]
    fn inactive_half_plane_keeps_preferred_velocity() {
        let line = OrcaLine::from_normal(Vec2::X, 1.0);
        assert_eq!(solve_velocity(&[line], 0, 2.0, Vec2::new(0.5, 0.5)), Vec2::new(0.5, 0.5));
    }

    #[test]
    fn violated_half_plane_projects_onto_boundary() {
        let n = Vec2::new(1.0, 1.0).normalize();
        let line = OrcaLine::from_normal(n, 0.2);
        let v_pref = Vec2::new(0.9, 0.3);
        let expected = v_pref - n * (v_pref.dot(n) - 0.2);
        let got = solve_velocity(&[line], 0, 2.0, v_pref);
        assert!((got - expected).length() < 1e-12, "{got:?} vs {expected:?}");
    }

    #[test]
    fn infeasible_constraints_fall_back_to_least_penetration() {
        // v.x <= -1 and v.x >= 1 cannot both hold; the minimax point is v.x = 0.
        let a = OrcaLine::from_normal(Vec2::X, -1.0);
        let b = OrcaLine::from_normal(-Vec2::X, -1.0);
        let got = solve_velocity(&[a, b], 0, 2.0, Vec2::new(0.5, 0.0));
        assert!(got.x.abs() < 1e-9, "{got:?}");
        assert!((a.violation(got) - 1.0).abs() < 1e-9 && (b.violation(got) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn head_on_pair_deflects() {
        let a = AgentState::new(Vec2::new(-2.0, 0.0), Vec2::new(1.0, 0.0));
        let b = RvoNeighbor { state: AgentState::new(Vec2::new(2.0, 0.0), Vec2::new(-1.0, 0.0)), radius: 0.5 };
        let p = AgentParams { radius: 0.5, agent_time_horizon: 2.0, ..params() };
        let v = rvo_new_velocity(&a, &[b], &[], &p, Vec2::new(1.0, 0.0), 0.1);
        let line = agent_orca_line(&a, 0.5, &b, 2.0, 0.1);
        assert!(line.contains(v));
        assert!(v != Vec2::new(1.0, 0.0));
    }

    #[test]
    fn wall_limits_approach_speed() {
        let agent = AgentState::new(Vec2::new(0.0, 1.0), Vec2::new(0.0, -1.0));
        let wall = Segment::new(Vec2::new(-5.0, 0.0), Vec2::new(5.0, 0.0));
        let p = AgentParams { radius: 0.5, obstacle_time_horizon: 1.0, ..params() };
        let v = rvo_new_velocity(&agent, &[], &[wall], &p, Vec2::new(0.0, -1.5), 0.1);
        assert!(v.y >= -0.5 - 1e-9, "{v:?}");
    }
}
