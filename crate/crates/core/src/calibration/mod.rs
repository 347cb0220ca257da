//! Mixture-of-models calibration: fit every motion model to the recent
//! window of tracked states and select the one that replays it best.

pub mod annealing;
pub mod benchmark;
pub mod genetic;
pub mod greedy;
pub mod replay;
pub mod search;
pub mod select;

pub use annealing::run_simulated_annealing;
pub use benchmark::{compare_optimizers, ErrorSummary, OptimizerBenchmark, OptimizerComparison, OptimizerTrial, TaskScope};
pub use genetic::run_genetic;
pub use greedy::run_greedy;
pub use replay::{replay_error, ConditionalReplay, ReplayError, ReplayGoals, ReplayProblem, ReplayScheme};
pub use search::{Dimension, GeneticSettings, GroupRates, Method, OptimizerSpec, Optimum, SearchSpace};
pub use select::{
    calibrate, optimize_params, predict_next, select_from_fits, select_model, CalibrationResult,
    CalibrationSettings, GoalSource, ModelFit, PreparedCrowd, Predictor, SelectionMode, WindowReport, GOAL_HORIZON,
};

use search::Budget;

/// Objective over a flat parameter vector. Must be safe to call from several
/// threads at once.
pub trait CostFn: Fn(&[f64]) -> f64 + Sync {}
impl<T: Fn(&[f64]) -> f64 + Sync> CostFn for T {}

/// Dispatches on `spec.method`.
pub fn run_optimizer<F: CostFn>(cost: &F, space: &SearchSpace, spec: &OptimizerSpec, seeds: &[Vec<f64>]) -> Optimum {
    match spec.method {
        Method::Greedy => run_greedy(cost, space, spec, seeds),
        Method::SimulatedAnnealing => run_simulated_annealing(cost, space, spec, seeds),
        Method::Genetic => run_genetic(cost, space, spec, seeds),
    }
}

/// Caller seeds (clamped into the space) followed by the table-mean point.
pub(crate) fn seed_points(space: &SearchSpace, seeds: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(seeds.len() + 1);
    for s in seeds.iter().filter(|s| s.len() == space.len()) {
        let mut s = s.clone();
        space.clamp(&mut s);
        if !out.contains(&s) {
            out.push(s);
        }
    }
    let mean = space.mean();
    if !out.contains(&mean) {
        out.push(mean);
    }
    out
}

/// Evaluates every seed point; returns the best (earliest on ties).
pub(crate) fn evaluate_seeds<F: CostFn>(cost: &F, space: &SearchSpace, seeds: &[Vec<f64>], budget: &mut Budget) -> (Vec<f64>, f64) {
    let mut best: Option<(Vec<f64>, f64)> = None;
    for point in seed_points(space, seeds) {
        if budget.exhausted() && best.is_some() {
            break;
        }
        let c = cost(&point);
        budget.used += 1;
        let c = if c.is_nan() { f64::INFINITY } else { c };
        if best.as_ref().is_none_or(|b| c < b.1) {
            best = Some((point, c));
        }
    }
    best.expect("seed_points is never empty")
}
