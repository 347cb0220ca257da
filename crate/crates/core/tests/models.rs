//! Motion-model properties checked against independent oracles.

use std::collections::BTreeMap;

use proptest::prelude::*;

use crowdtrack::calibration::{predict_next, CalibrationResult};
use crowdtrack::geometry::Bounds;
use crowdtrack::models::rvo::{solve_velocity, OrcaLine};
use crowdtrack::models::{preferred_velocity, step, ModelConstants, ModelKind, ModelParams};
use crowdtrack::scenario::Scenario;
use crowdtrack::synthesis::{generate, sample_template_params, DensityClass, ScenarioTemplate, TemplateKind};
use crowdtrack::{AgentState, Vec2};

/// Closest feasible point of a 0.005 grid, found by exhaustive search.
fn grid_oracle(lines: &[OrcaLine], max_speed: f64, v_pref: Vec2) -> Option<(Vec2, f64)> {
    let step = 0.005;
    let n = (max_speed / step).ceil() as i64;
    let mut best: Option<(Vec2, f64)> = None;
    for i in -n..=n {
        for j in -n..=n {
            let v = Vec2::new(i as f64 * step, j as f64 * step);
            if v.length() > max_speed || lines.iter().any(|l| l.violation(v) > 0.0) {
                continue;
            }
            let d = v.distance(v_pref);
            if best.is_none_or(|(_, b)| d < b) {
                best = Some((v, d));
            }
        }
    }
    best
}

#[test]
fn sequential_lp_matches_grid_on_a_wedge() {
    // Two half-planes x <= 0.5 and y <= 0.2; preferred velocity outside both.
    let lines = [OrcaLine::from_normal(Vec2::X, 0.5), OrcaLine::from_normal(Vec2::Y, 0.2)];
    let v_pref = Vec2::new(1.0, 1.0);
    let v = solve_velocity(&lines, 0, 1.5, v_pref);
    assert!((v - Vec2::new(0.5, 0.2)).length() < 1e-9, "{v}");
    let (g, d) = grid_oracle(&lines, 1.5, v_pref).unwrap();
    assert!((g - v).length() <= 0.01 && (d - v.distance(v_pref)).abs() <= 0.01);
}

#[test]
fn speed_disc_is_respected() {
    let v = solve_velocity(&[], 0, 1.0, Vec2::new(3.0, 4.0));
    assert!((v - Vec2::new(0.6, 0.8)).length() < 1e-12);
}

#[test]
fn lin_single_agent_is_a_straight_line() {
    let scenario = Scenario::new(0.04, Bounds::new(Vec2::splat(-50.0), Vec2::splat(50.0)));
    let mut states = BTreeMap::from([(7, AgentState::new(Vec2::new(1.0, -2.0), Vec2::new(0.3, 0.4)))]);
    let params = ModelParams::new(ModelKind::Lin);
    for i in 1..=100 {
        states = step(ModelKind::Lin, &states, &scenario, &params, &ModelConstants::default()).unwrap();
        let expected = Vec2::new(1.0, -2.0) + Vec2::new(0.3, 0.4) * (0.04 * i as f64);
        assert!(states[&7].position.distance(expected) < 1e-9);
    }
}

#[test]
fn predictions_reproduce_the_generator() {
    let constants = ModelConstants::default();
    for kind in [ModelKind::Boids, ModelKind::SocialForces, ModelKind::Rvo] {
        let template = ScenarioTemplate::new(TemplateKind::Crossing, 12, DensityClass::Medium, 4);
        let params = sample_template_params(&template, kind, 9);
        let generated = generate(&template, kind, &params, 30, &constants).unwrap();
        let snapshots = generated.ground_truth.snapshots();
        let result = CalibrationResult::fixed(params.clone());
        for f in 0..29u64 {
            let next = predict_next(&result, &snapshots[&f].agents, &generated.scenario, &constants);
            for (id, s) in &next {
                let truth = snapshots[&(f + 1)].agents[id];
                assert!(s.position.distance(truth.position) <= 1e-6, "{kind} frame {f} agent {id}");
            }
        }
    }
}

proptest! {
    #[test]
    fn lp_solution_is_feasible_and_grid_optimal(
        normals in prop::collection::vec((0.0..std::f64::consts::TAU, -0.3..1.2f64), 1..4),
        angle in 0.0..std::f64::consts::TAU,
        speed in 0.0..2.0f64,
    ) {
        let lines: Vec<OrcaLine> =
            normals.iter().map(|&(a, off)| OrcaLine::from_normal(Vec2::new(a.cos(), a.sin()), off)).collect();
        let v_pref = Vec2::new(angle.cos(), angle.sin()) * speed;
        let max_speed = 1.5;
        if let Some((_, grid_d)) = grid_oracle(&lines, max_speed, v_pref) {
            let v = solve_velocity(&lines, 0, max_speed, v_pref);
            prop_assert!(v.length() <= max_speed + 1e-9);
            for l in &lines {
                prop_assert!(l.violation(v) <= 1e-9);
            }
            let d = v.distance(v_pref);
            prop_assert!(d <= grid_d + 1e-9);
            // Convex problem: no feasible nearby point may improve on the LP.
            for k in 0..64 {
                let a = k as f64 * std::f64::consts::TAU / 64.0;
                for r in [1e-4, 1e-3, 1e-2] {
                    let u = v + Vec2::new(a.cos(), a.sin()) * r;
                    if u.length() <= max_speed && lines.iter().all(|l| l.violation(u) <= 0.0) {
                        prop_assert!(u.distance(v_pref) >= d - 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn preferred_velocity_never_overshoots(
        px in -5.0..5.0f64, py in -5.0..5.0f64, gx in -5.0..5.0f64, gy in -5.0..5.0f64,
        speed in 0.1..2.5f64, dt in 0.01..0.2f64,
    ) {
        let (p, g) = (Vec2::new(px, py), Vec2::new(gx, gy));
        let v = preferred_velocity(p, g, speed, dt);
        prop_assert!(v.length() <= speed + 1e-9);
        prop_assert!((p + v * dt).distance(g) <= p.distance(g) + 1e-9);
    }

    #[test]
    fn every_model_respects_the_speed_cap(seed in 0u64..50, kind_index in 0usize..4) {
        let kind = ModelKind::ALL[kind_index];
        let constants = ModelConstants { v_cap: 1.0, ..Default::default() };
        let template = ScenarioTemplate::new(TemplateKind::ALL[seed as usize % 4], 8, DensityClass::High, seed);
        let params = sample_template_params(&template, kind, seed);
        let generated = generate(&template, kind, &params, 15, &constants).unwrap();
        // Frame 0 holds the template's initial velocities; every stepped frame is capped.
        for r in generated.ground_truth.records.iter().filter(|r| r.frame > 0) {
            prop_assert!(r.velocity().map_or(0.0, |v| v.length()) <= 1.0 + 1e-9, "frame {}", r.frame);
        }
    }
}
