//! Optimizers and model selection against independent baselines.

use crowdtrack::calibration::{
    optimize_params, replay_error, run_optimizer, Dimension, Method, OptimizerSpec, SearchSpace,
};
use crowdtrack::models::{ModelConstants, ModelKind, ModelParams};
use crowdtrack::rng::substream;
use crowdtrack::synthesis::{generate, sample_template_params, DensityClass, ScenarioTemplate, TemplateKind};
use crowdtrack::StateHistory;

fn rastrigin(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v - 2.0 * (std::f64::consts::TAU * v).cos() + 2.0).sum()
}

fn sphere(x: &[f64]) -> f64 {
    x.iter().map(|v| (v - 0.3) * (v - 0.3)).sum()
}

fn space(n: usize) -> SearchSpace {
    SearchSpace::new((0..n).map(|_| Dimension::uniform(-2.0, 2.0)).collect())
}

#[test]
fn annealing_beats_random_search_with_equal_evaluations() {
    let space = space(3);
    let mut wins = 0;
    for seed in 0..10 {
        let spec = OptimizerSpec { max_evaluations: Some(500), ..OptimizerSpec::new(Method::SimulatedAnnealing, 500, seed) };
        let sa = run_optimizer(&rastrigin, &space, &spec, &[]);
        assert!(sa.evaluations <= 500);
        let mut rng = substream(seed, &[0x55]);
        let random = (0..500).map(|_| rastrigin(&space.sample(&mut rng))).fold(f64::INFINITY, f64::min);
        wins += (sa.cost <= random) as usize;
    }
    assert!(wins >= 7, "annealing won only {wins}/10");
}

#[test]
fn genetic_matches_annealing_on_a_sphere() {
    let space = space(4);
    for seed in 0..5 {
        let cap = Some(2000);
        let ga = run_optimizer(&sphere, &space, &OptimizerSpec { max_evaluations: cap, ..OptimizerSpec::new(Method::Genetic, 50, seed) }, &[]);
        let sa = run_optimizer(
            &sphere,
            &space,
            &OptimizerSpec { max_evaluations: cap, ..OptimizerSpec::new(Method::SimulatedAnnealing, 2000, seed) },
            &[],
        );
        assert!(ga.cost < 0.05, "GA {}", ga.cost);
        assert!(ga.cost <= sa.cost + 0.05, "GA {} SA {}", ga.cost, sa.cost);
    }
}

#[test]
fn optimizers_are_deterministic_and_bounded() {
    let space = space(2);
    for method in [Method::Greedy, Method::SimulatedAnnealing, Method::Genetic] {
        let spec = OptimizerSpec { max_evaluations: Some(300), ..OptimizerSpec::new(method, 30, 42) };
        let a = run_optimizer(&rastrigin, &space, &spec, &[]);
        let b = run_optimizer(&rastrigin, &space, &spec, &[]);
        assert_eq!(a.params, b.params);
        assert_eq!(a.cost.to_bits(), b.cost.to_bits());
        assert!(space.contains(&a.params));
        assert!(a.trace.windows(2).all(|w| w[1] <= w[0]));
    }
}

fn window(kind: ModelKind, seed: u64) -> (StateHistory, crowdtrack::scenario::Scenario, ModelParams) {
    let template = ScenarioTemplate::new(TemplateKind::HeadOnCorridor, 6, DensityClass::Medium, seed);
    let params = sample_template_params(&template, kind, seed);
    let generated = generate(&template, kind, &params, 21, &ModelConstants::default()).unwrap();
    let mut h = StateHistory::new(20, generated.scenario.dt).unwrap();
    for s in generated.ground_truth.snapshots().into_values() {
        h.push(s).unwrap();
    }
    (h, generated.scenario, params)
}

#[test]
fn interacting_window_prefers_its_generator_over_lin() {
    let constants = ModelConstants::default();
    let (h, scenario, params) = window(ModelKind::Rvo, 2);
    let lin = replay_error(ModelKind::Lin, &ModelParams::new(ModelKind::Lin), &h, &scenario, &constants).unwrap();
    let rvo = replay_error(ModelKind::Rvo, &params, &h, &scenario, &constants).unwrap();
    assert!(lin.total > rvo.total, "LIN {} RVO {}", lin.total, rvo.total);
}

#[test]
fn lin_calibration_uses_no_evaluations() {
    let (h, scenario, _) = window(ModelKind::Boids, 1);
    let fit = optimize_params(ModelKind::Lin, &h, &scenario, &OptimizerSpec::default(), &ModelConstants::default(), None)
        .unwrap();
    assert_eq!(fit.evaluations, 0);
    assert!(fit.params.agents.is_empty());
}

#[test]
fn search_space_sampling_covers_the_box() {
    let space = SearchSpace::for_model(ModelKind::Rvo, 1);
    let mut rng = substream(3, &[]);
    for _ in 0..1000 {
        let x = space.sample(&mut rng);
        assert!(space.contains(&x));
    }
}
