//! Simulated annealing over a box-bounded parameter space.
//!
//! The loop counter `k` counts iterations without a new optimum and resets
//! whenever the best-ever cost improves; the search stops when `k` reaches
//! the budget `K`. Temperature falls linearly as `(K − k) / K`.

use rand::Rng;

use super::search::{Budget, OptimizerSpec, Optimum, SearchSpace};
use super::{evaluate_seeds, CostFn};
use crate::rng::substream;

/// Acceptance rule: improvements always, otherwise with probability
/// `exp((e_old − e_new) / T)` tested against the uniform draw `u`.
pub fn annealing_move(e_old: f64, e_new: f64, temperature: f64, u: f64) -> bool {
    if !e_new.is_finite() {
        return false;
    }
    if e_new < e_old {
        return true;
    }
    u < ((e_old - e_new) / temperature).exp()
}

/// `(K − k) / K`.
pub fn temperature(k: usize, budget: usize) -> f64 {
    (budget - k) as f64 / budget as f64
}

/// Picks a random parameter and replaces it with a draw from its base distribution.
pub fn neighbor_state<R: Rng + ?Sized>(state: &[f64], space: &SearchSpace, rng: &mut R) -> Vec<f64> {
    let mut next = state.to_vec();
    let d = rng.random_range(0..space.len());
    next[d] = space.dims[d].sample(rng);
    next
}

pub fn run_simulated_annealing<F: CostFn>(cost: &F, space: &SearchSpace, spec: &OptimizerSpec, seeds: &[Vec<f64>]) -> Optimum {
    let mut budget = Budget::new(spec.max_evaluations);
    let (mut state, mut energy) = evaluate_seeds(cost, space, seeds, &mut budget);
    let (mut best, mut best_energy) = (state.clone(), energy);
    let mut trace = vec![best_energy];
    if space.is_empty() {
        return Optimum { params: best, cost: best_energy, evaluations: budget.used, trace };
    }
    let mut rng = substream(spec.seed, &[0x5A]);
    let k_max = spec.budget;
    let mut k = 0;
    while k < k_max && !budget.exhausted() {
        let t = temperature(k, k_max);
        let candidate = neighbor_state(&state, space, &mut rng);
        let e_new = cost(&candidate);
        budget.used += 1;
        if annealing_move(energy, e_new, t, rng.random::<f64>()) {
            state = candidate;
            energy = e_new;
        }
        if energy < best_energy {
            best.clone_from(&state);
            best_energy = energy;
            k = 0;
        }
        k += 1;
        trace.push(best_energy);
    }
    Optimum { params: best, cost: best_energy, evaluations: budget.used, trace }
}
