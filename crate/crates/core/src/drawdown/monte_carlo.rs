//! Monte Carlo drawdown estimators.
//!
//! Path `i` of a run seeded with `s` always draws its outcomes from
//! [`path_rng(s, i)`](crate::par::path_rng), and outcome sampling does not
//! depend on the allocation. Estimates at different `K` with the same seed
//! therefore share their random numbers.

use serde::{Deserialize, Serialize};

use super::path::{DrawdownStats, DrawdownTracker};
use crate::config::MIN_PATHS;
use crate::gamble::{is_feasible, GambleModel};
use crate::par::{map_range, path_rng, Execution};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonteCarloConfig {
    pub paths: usize,
    pub seed: u64,
    #[serde(skip)]
    pub execution: Execution,
}

impl MonteCarloConfig {
    pub fn new(paths: usize, seed: u64) -> Self {
        MonteCarloConfig {
            paths,
            seed,
            execution: Execution::default(),
        }
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.paths < MIN_PATHS {
            return Err(Error::invalid(format!(
                "at least {MIN_PATHS} paths required, got {}",
                self.paths
            )));
        }
        Ok(())
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    /// Mean and `s/√n` of `values`, summed in slice order.
    pub fn from_samples(values: &[f64]) -> Estimate {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        if values.len() < 2 || !mean.is_finite() {
            return Estimate {
                value: mean,
                std_error: if mean.is_finite() { 0.0 } else { f64::NAN },
            };
        }
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Estimate {
            value: mean,
            std_error: (var / n).sqrt(),
        }
    }

    /// Frequency of `hit` over the samples, with binomial standard error.
    pub fn frequency<T>(samples: &[T], hit: impl Fn(&T) -> bool) -> Estimate {
        let ind: Vec<f64> = samples.iter().map(|s| if hit(s) { 1.0 } else { 0.0 }).collect();
        Estimate::from_samples(&ind)
    }
}

fn check(model: &GambleModel, k: &[f64], steps: usize, mc: &MonteCarloConfig) -> Result<()> {
    mc.validate()?;
    if !is_feasible(k, model)? {
        return Err(Error::Infeasible(k.to_vec()));
    }
    if steps == 0 {
        return Err(Error::invalid("horizon must be at least one step"));
    }
    Ok(())
}

/// Drawdown statistics of every simulated path, in path order.
pub fn sample_drawdowns(
    model: &GambleModel,
    k: &[f64],
    steps: usize,
    mc: &MonteCarloConfig,
) -> Result<Vec<DrawdownStats>> {
    check(model, k, steps, mc)?;
    let factors = model.wealth_factors(k);
    Ok(map_range(mc.paths, mc.execution, |i| {
        let mut rng = path_rng(mc.seed, i as u64);
        let mut t = DrawdownTracker::new(1.0);
        for _ in 0..steps {
            t.step(factors[model.sample_index(&mut rng)]);
        }
        t.stats()
    }))
}

pub fn expected_drawdown_mc(
    model: &GambleModel,
    k: &[f64],
    steps: usize,
    mc: &MonteCarloConfig,
) -> Result<Estimate> {
    let d: Vec<f64> = sample_drawdowns(model, k, steps, mc)?
        .iter()
        .map(|s| s.max_drawdown)
        .collect();
    Ok(Estimate::from_samples(&d))
}

/// Empirical `P(D(K) ≤ ε)`.
pub fn drawdown_probability_mc(
    model: &GambleModel,
    k: &[f64],
    steps: usize,
    epsilon: f64,
    mc: &MonteCarloConfig,
) -> Result<Estimate> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::invalid(format!("epsilon {epsilon} must lie in (0, 1]")));
    }
    let s = sample_drawdowns(model, k, steps, mc)?;
    Ok(Estimate::frequency(&s, |s| s.max_drawdown <= epsilon))
}

/// Monte Carlo `E[log D̄(K)]`; `-∞` as soon as one path is ruined.
pub fn expected_log_complementary_mc(
    model: &GambleModel,
    k: &[f64],
    steps: usize,
    mc: &MonteCarloConfig,
) -> Result<Estimate> {
    let v: Vec<f64> = sample_drawdowns(model, k, steps, mc)?
        .iter()
        .map(|s| s.log_complementary)
        .collect();
    Ok(Estimate::from_samples(&v))
}

/// Pre-drawn atom index sequences for common-random-number sweeps.
///
/// Holds the same outcomes [`sample_drawdowns`] would draw with the same
/// configuration, so sweeping many allocations costs one sampling pass.
#[derive(Debug, Clone)]
pub struct Scenarios {
    steps: usize,
    paths: usize,
    indices: Vec<u32>,
    execution: Execution,
}

impl Scenarios {
    pub fn generate(model: &GambleModel, steps: usize, mc: &MonteCarloConfig) -> Result<Self> {
        mc.validate()?;
        if steps == 0 {
            return Err(Error::invalid("horizon must be at least one step"));
        }
        if model.atom_count() > u32::MAX as usize {
            return Err(Error::invalid("too many atoms for scenario storage"));
        }
        let per_path = map_range(mc.paths, mc.execution, |i| {
            let mut rng = path_rng(mc.seed, i as u64);
            (0..steps)
                .map(|_| model.sample_index(&mut rng) as u32)
                .collect::<Vec<u32>>()
        });
        Ok(Scenarios {
            steps,
            paths: mc.paths,
            indices: per_path.concat(),
            execution: mc.execution,
        })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn paths(&self) -> usize {
        self.paths
    }

    /// Per-path drawdown statistics at allocation `k`.
    pub fn drawdowns(&self, model: &GambleModel, k: &[f64]) -> Result<Vec<DrawdownStats>> {
        if !is_feasible(k, model)? {
            return Err(Error::Infeasible(k.to_vec()));
        }
        let factors = model.wealth_factors(k);
        Ok(map_range(self.paths, self.execution, |i| {
            let mut t = DrawdownTracker::new(1.0);
            for &a in &self.indices[i * self.steps..(i + 1) * self.steps] {
                t.step(factors[a as usize]);
            }
            t.stats()
        }))
    }
}
