//! Search spaces, base distributions and optimizer settings shared by the
//! three optimizers.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{ModelKind, Param};

/// Sampling law for fresh parameter values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BaseDistribution {
    Uniform,
    /// Normal law truncated to the dimension's range.
    TruncatedNormal { mean: f64, sd: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dimension {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub base: BaseDistribution,
}

impl Dimension {
    pub fn uniform(min: f64, max: f64) -> Self {
        Self { min, max, mean: 0.5 * (min + max), base: BaseDistribution::Uniform }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.base {
            BaseDistribution::Uniform => {
                if self.max > self.min {
                    rng.random_range(self.min..=self.max)
                } else {
                    self.min
                }
            }
            BaseDistribution::TruncatedNormal { mean, sd } => self.sample_normal(rng, mean, sd),
        }
    }

    /// Draw from N(mean, sd) restricted to the range (rejection, then clamp).
    pub fn sample_normal<R: Rng + ?Sized>(&self, rng: &mut R, mean: f64, sd: f64) -> f64 {
        if sd.is_nan() || sd <= 0.0 {
            return mean.clamp(self.min, self.max);
        }
        let normal = Normal::new(mean, sd).expect("positive sd");
        for _ in 0..64 {
            let v = normal.sample(rng);
            if v >= self.min && v <= self.max {
                return v;
            }
        }
        mean.clamp(self.min, self.max)
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.min, self.max)
    }
}

/// A box-bounded search space with a base distribution per dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    pub dims: Vec<Dimension>,
}

impl SearchSpace {
    pub fn new(dims: Vec<Dimension>) -> Self {
        Self { dims }
    }

    /// The parameter table of `kind` repeated for `agents` agents (agent-major).
    ///
    /// Comfort speed follows N(1.4, 0.3) truncated to its range; everything
    /// else is uniform over its range.
    pub fn for_model(kind: ModelKind, agents: usize) -> Self {
        let per_agent: Vec<Dimension> = kind
            .param_ranges()
            .iter()
            .map(|r| Dimension {
                min: r.min,
                max: r.max,
                mean: r.mean,
                base: if r.param == Param::ComfortSpeed {
                    BaseDistribution::TruncatedNormal { mean: 1.4, sd: 0.3 }
                } else {
                    BaseDistribution::Uniform
                },
            })
            .collect();
        Self { dims: (0..agents).flat_map(|_| per_agent.iter().copied()).collect() }
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    /// The table-mean point.
    pub fn mean(&self) -> Vec<f64> {
        self.dims.iter().map(|d| d.mean).collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.dims.iter().map(|d| d.sample(rng)).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dims.len() && x.iter().zip(&self.dims).all(|(v, d)| *v >= d.min && *v <= d.max)
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (v, d) in x.iter_mut().zip(&self.dims) {
            *v = d.clamp(*v);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Greedy,
    SimulatedAnnealing,
    Genetic,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "greedy" => Ok(Method::Greedy),
            "sa" | "annealing" | "simulated_annealing" | "simulated-annealing" => Ok(Method::SimulatedAnnealing),
            "ga" | "genetic" => Ok(Method::Genetic),
            other => Err(Error::InvalidInput(format!("unknown optimizer `{other}`"))),
        }
    }
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Greedy => "greedy",
            Method::SimulatedAnnealing => "simulated_annealing",
            Method::Genetic => "genetic",
        }
    }
}

/// Reproduction probabilities of one genetic-algorithm group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupRates {
    /// Probability that a parameter value is changed at all.
    pub alpha: f64,
    /// Probability that a change is a crossover rather than a mutation.
    pub beta: f64,
    /// Probability that a mutation samples the base distribution rather than
    /// the Best group's current distribution.
    pub gamma: f64,
}

impl GroupRates {
    pub const fn new(alpha: f64, beta: f64, gamma: f64) -> Self {
        Self { alpha, beta, gamma }
    }

    fn is_valid(&self) -> bool {
        [self.alpha, self.beta, self.gamma].iter().all(|p| (0.0..=1.0).contains(p))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneticSettings {
    pub pool_size: usize,
    /// Fractions of the sorted pool in the Best, Middle and Worst groups.
    pub group_fractions: [f64; 3],
    pub best: GroupRates,
    pub middle: GroupRates,
    pub worst: GroupRates,
    /// Top-ranked individuals carried into the next generation unchanged.
    pub elite: usize,
}

impl Default for GeneticSettings {
    fn default() -> Self {
        Self {
            pool_size: 30,
            group_fractions: [1.0 / 3.0; 3],
            best: GroupRates::new(0.1, 0.5, 0.5),
            middle: GroupRates::new(0.4, 0.5, 0.5),
            worst: GroupRates::new(0.8, 0.5, 0.5),
            elite: 1,
        }
    }
}

impl GeneticSettings {
    /// Sizes of the Best, Middle and Worst groups; Best is never empty.
    pub fn group_sizes(&self) -> [usize; 3] {
        let n = self.pool_size;
        let total: f64 = self.group_fractions.iter().sum();
        let best = ((self.group_fractions[0] / total * n as f64).round() as usize).clamp(1, n);
        let middle = ((self.group_fractions[1] / total * n as f64).round() as usize).min(n - best);
        [best, middle, n - best - middle]
    }
}

/// Which optimizer to run and with what budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerSpec {
    pub method: Method,
    /// Iterations (generations for the genetic algorithm) without a new
    /// optimum before the search stops.
    pub budget: usize,
    pub seed: u64,
    /// Optional hard cap on cost evaluations.
    pub max_evaluations: Option<usize>,
    pub genetic: GeneticSettings,
}

impl Default for OptimizerSpec {
    fn default() -> Self {
        Self { method: Method::Genetic, budget: 20, seed: 0, max_evaluations: None, genetic: GeneticSettings::default() }
    }
}

impl OptimizerSpec {
    pub fn new(method: Method, budget: usize, seed: u64) -> Self {
        Self { method, budget, seed, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget < 1 {
            return Err(Error::InvalidInput("optimizer budget K must be at least 1".into()));
        }
        let g = &self.genetic;
        if g.pool_size < 3 {
            return Err(Error::InvalidInput("genetic pool size must be at least 3".into()));
        }
        if !(g.best.is_valid() && g.middle.is_valid() && g.worst.is_valid()) {
            return Err(Error::InvalidInput("genetic probabilities must lie in [0, 1]".into()));
        }
        if g.group_fractions.iter().any(|f| f.is_nan() || *f < 0.0) || g.group_fractions[0] <= 0.0 {
            return Err(Error::InvalidInput("genetic group fractions must be non-negative with a non-empty Best group".into()));
        }
        if self.max_evaluations == Some(0) {
            return Err(Error::InvalidInput("max_evaluations must be positive".into()));
        }
        Ok(())
    }
}

/// Result of one optimizer run.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub params: Vec<f64>,
    pub cost: f64,
    /// Number of cost-function invocations.
    pub evaluations: usize,
    /// Best-ever cost after initialization and after every iteration.
    pub trace: Vec<f64>,
}

/// Counts evaluations against an optional cap.
pub(crate) struct Budget {
    pub used: usize,
    cap: Option<usize>,
}

impl Budget {
    pub fn new(cap: Option<usize>) -> Self {
        Self { used: 0, cap }
    }

    pub fn exhausted(&self) -> bool {
        self.cap.is_some_and(|c| self.used >= c)
    }

    pub fn remaining(&self) -> usize {
        self.cap.map_or(usize::MAX, |c| c.saturating_sub(self.used))
    }
}
