//! Genetic algorithm with Best / Middle / Worst groups.
//!
//! Each generation the pool is ranked and split into three groups. Every
//! parameter of every individual is changed with its group's probability
//! `alpha`; a change is a crossover (copy from a Best individual) with
//! probability `beta`, otherwise a mutation drawn from the base distribution
//! (probability `gamma`) or from the Best group's current distribution.
//! The search stops after `K` generations without a new optimum.

use rand::Rng;
use rayon::prelude::*;

use super::search::{Budget, GroupRates, OptimizerSpec, Optimum, SearchSpace};
use super::{seed_points, CostFn};
use crate::rng::substream;

struct Individual {
    genes: Vec<f64>,
    score: Option<f64>,
}

pub fn run_genetic<F: CostFn>(cost: &F, space: &SearchSpace, spec: &OptimizerSpec, seeds: &[Vec<f64>]) -> Optimum {
    let settings = &spec.genetic;
    let pool_size = settings.pool_size;
    let mut budget = Budget::new(spec.max_evaluations);

    let mut init_rng = substream(spec.seed, &[0x6A, u64::MAX]);
    let mut pool: Vec<Individual> = seed_points(space, seeds)
        .into_iter()
        .take(pool_size)
        .map(|genes| Individual { genes, score: None })
        .collect();
    while pool.len() < pool_size {
        pool.push(Individual { genes: space.sample(&mut init_rng), score: None });
    }

    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut trace = Vec::new();
    let mut stagnant = 0;
    let mut generation: u64 = 0;
    loop {
        // Evaluate new or changed individuals, in pool order, within the budget.
        let pending: Vec<usize> =
            (0..pool.len()).filter(|&i| pool[i].score.is_none()).take(budget.remaining()).collect();
        let scores: Vec<f64> = pending.par_iter().map(|&i| sanitize(cost(&pool[i].genes))).collect();
        budget.used += pending.len();
        for (&i, s) in pending.iter().zip(scores) {
            pool[i].score = Some(s);
        }

        // Selection: rank by score, ties by pool position.
        let mut order: Vec<usize> = (0..pool.len()).filter(|&i| pool[i].score.is_some()).collect();
        order.sort_by(|&a, &b| pool[a].score.unwrap().total_cmp(&pool[b].score.unwrap()).then(a.cmp(&b)));
        if let Some(&top) = order.first() {
            let top_score = pool[top].score.unwrap();
            match &best {
                Some((_, b)) if top_score >= *b => stagnant += 1,
                _ => {
                    best = Some((pool[top].genes.clone(), top_score));
                    stagnant = 0;
                }
            }
        }
        trace.push(best.as_ref().map_or(f64::INFINITY, |b| b.1));

        if stagnant >= spec.budget || budget.exhausted() || space.is_empty() {
            break;
        }

        generation += 1;
        reproduce(&mut pool, &order, space, spec, generation);
    }

    let (params, cost) = best.unwrap_or_else(|| (space.mean(), f64::INFINITY));
    Optimum { params, cost, evaluations: budget.used, trace }
}

fn sanitize(c: f64) -> f64 {
    if c.is_nan() {
        f64::INFINITY
    } else {
        c
    }
}

fn reproduce(pool: &mut [Individual], order: &[usize], space: &SearchSpace, spec: &OptimizerSpec, generation: u64) {
    let settings = &spec.genetic;
    let [n_best, n_middle, _] = settings.group_sizes();
    let best_group: Vec<usize> = order[..n_best.min(order.len())].to_vec();
    let best_genes: Vec<Vec<f64>> = best_group.iter().map(|&i| pool[i].genes.clone()).collect();

    // Current distribution of each parameter over the Best group.
    let stats: Vec<(f64, f64)> = (0..space.len())
        .map(|d| {
            let n = best_genes.len() as f64;
            let mean = best_genes.iter().map(|g| g[d]).sum::<f64>() / n;
            let var = best_genes.iter().map(|g| (g[d] - mean).powi(2)).sum::<f64>() / n;
            let dim = &space.dims[d];
            (mean, var.sqrt().max(0.01 * (dim.max - dim.min)))
        })
        .collect();

    for (rank, &i) in order.iter().enumerate() {
        let rates: GroupRates = if rank < n_best {
            settings.best
        } else if rank < n_best + n_middle {
            settings.middle
        } else {
            settings.worst
        };
        if rates.alpha <= 0.0 || rank < settings.elite {
            continue;
        }
        let mut rng = substream(spec.seed, &[0x6A, generation, i as u64]);
        let ind = &mut pool[i];
        let mut changed = false;
        for d in 0..space.len() {
            if rng.random::<f64>() >= rates.alpha {
                continue;
            }
            let value = if rng.random::<f64>() < rates.beta {
                best_genes[rng.random_range(0..best_genes.len())][d]
            } else if rng.random::<f64>() < rates.gamma {
                space.dims[d].sample(&mut rng)
            } else {
                space.dims[d].sample_normal(&mut rng, stats[d].0, stats[d].1)
            };
            if value != ind.genes[d] {
                ind.genes[d] = value;
                changed = true;
            }
        }
        if changed {
            ind.score = None;
        }
    }
}
