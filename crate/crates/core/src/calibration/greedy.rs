//! Greedy search: every iteration perturbs the best set seen so far and keeps
//! the candidate only if it lowers the error.

use super::annealing::neighbor_state;
use super::search::{Budget, OptimizerSpec, Optimum, SearchSpace};
use super::{evaluate_seeds, CostFn};
use crate::rng::substream;

pub fn run_greedy<F: CostFn>(cost: &F, space: &SearchSpace, spec: &OptimizerSpec, seeds: &[Vec<f64>]) -> Optimum {
    let mut budget = Budget::new(spec.max_evaluations);
    let (mut best, mut best_cost) = evaluate_seeds(cost, space, seeds, &mut budget);
    let mut trace = vec![best_cost];
    if space.is_empty() {
        return Optimum { params: best, cost: best_cost, evaluations: budget.used, trace };
    }
    let mut rng = substream(spec.seed, &[0x6E]);
    let mut stagnant = 0;
    while stagnant < spec.budget && !budget.exhausted() {
        let candidate = neighbor_state(&best, space, &mut rng);
        let c = cost(&candidate);
        budget.used += 1;
        if c < best_cost {
            best = candidate;
            best_cost = c;
            stagnant = 0;
        } else {
            stagnant += 1;
        }
        trace.push(best_cost);
    }
    Optimum { params: best, cost: best_cost, evaluations: budget.used, trace }
}
