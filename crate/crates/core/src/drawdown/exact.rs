//! Brute-force expectation over every outcome sequence of length `N`.
//!
//! Used as the reference for the Monte Carlo estimators and wherever a
//! statement must hold exactly (concavity, Jensen) at desk scale.

use serde::{Deserialize, Serialize};

use super::path::{DrawdownStats, DrawdownTracker};
use crate::config::ENUMERATION_BUDGET;
use crate::gamble::{is_feasible, GambleModel};
use crate::par::{map_range, Execution};
use crate::{Error, Result};

/// Probability-weighted sums over all `atoms^N` sequences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactSummary {
    pub expected_drawdown: f64,
    pub expected_complementary: f64,
    /// `E[log D̄(K)]`, `-∞` if ruin has positive probability.
    pub expected_log_complementary: f64,
    pub sequences: u64,
}

/// Number of sequences `atoms^N`, saturating at `u64::MAX`.
pub fn sequence_count(model: &GambleModel, steps: usize) -> u64 {
    let base = model.atom_count() as u64;
    u32::try_from(steps)
        .ok()
        .and_then(|s| base.checked_pow(s))
        .unwrap_or(u64::MAX)
}

pub fn check_budget(model: &GambleModel, steps: usize, budget: u64) -> Result<u64> {
    let required = sequence_count(model, steps);
    if required > budget {
        return Err(Error::BudgetExceeded { required, budget });
    }
    Ok(required)
}

/// Folds `visit(acc, probability, stats)` over every sequence of `steps`
/// outcomes. Subtrees below the first outcome are folded independently
/// (in parallel when `exec` allows) and merged in atom order.
pub fn fold_sequences<A, I, V, M>(
    model: &GambleModel,
    k: &[f64],
    steps: usize,
    exec: Execution,
    init: I,
    visit: V,
    merge: M,
) -> Result<A>
where
    A: Send,
    I: Fn() -> A + Sync + Send,
    V: Fn(&mut A, f64, &DrawdownStats) + Sync + Send,
    M: Fn(A, A) -> A,
{
    if !is_feasible(k, model)? {
        return Err(Error::Infeasible(k.to_vec()));
    }
    if steps == 0 {
        return Err(Error::invalid("horizon must be at least one step"));
    }
    let factors = model.wealth_factors(k);
    let probs: Vec<f64> = model.atoms().iter().map(|a| a.p).collect();

    let parts = map_range(factors.len(), exec, |first| {
        let mut acc = init();
        let mut tracker = DrawdownTracker::new(1.0);
        tracker.step(factors[first]);
        descend(&factors, &probs, steps - 1, probs[first], tracker, &mut acc, &visit);
        acc
    });
    let mut it = parts.into_iter();
    let first = it.next().unwrap_or_else(&init);
    Ok(it.fold(first, merge))
}

fn descend<A, V>(
    factors: &[f64],
    probs: &[f64],
    remaining: usize,
    prob: f64,
    tracker: DrawdownTracker,
    acc: &mut A,
    visit: &V,
) where
    V: Fn(&mut A, f64, &DrawdownStats),
{
    if remaining == 0 {
        visit(acc, prob, &tracker.stats());
        return;
    }
    for (f, p) in factors.iter().zip(probs) {
        let mut next = tracker;
        next.step(*f);
        descend(factors, probs, remaining - 1, prob * p, next, acc, visit);
    }
}

#[derive(Default)]
struct Sums {
    drawdown: f64,
    complementary: f64,
    log_complementary: f64,
    ruin: bool,
}

pub fn exact_summary(
    model: &GambleModel,
    k: &[f64],
    steps: usize,
    budget: u64,
    exec: Execution,
) -> Result<ExactSummary> {
    let sequences = check_budget(model, steps, budget)?;
    let sums = fold_sequences(
        model,
        k,
        steps,
        exec,
        Sums::default,
        |acc, p, s| {
            acc.drawdown += p * s.max_drawdown;
            acc.complementary += p * s.complementary;
            if s.log_complementary == f64::NEG_INFINITY {
                acc.ruin = true;
            } else {
                acc.log_complementary += p * s.log_complementary;
            }
        },
        |a, b| Sums {
            drawdown: a.drawdown + b.drawdown,
            complementary: a.complementary + b.complementary,
            log_complementary: a.log_complementary + b.log_complementary,
            ruin: a.ruin || b.ruin,
        },
    )?;
    Ok(ExactSummary {
        expected_drawdown: sums.drawdown,
        expected_complementary: sums.complementary,
        expected_log_complementary: if sums.ruin {
            f64::NEG_INFINITY
        } else {
            sums.log_complementary
        },
        sequences,
    })
}

/// Exact `E[D(K)]` within the default enumeration budget.
pub fn expected_drawdown_exact(model: &GambleModel, k: &[f64], steps: usize) -> Result<f64> {
    Ok(exact_summary(model, k, steps, ENUMERATION_BUDGET, Execution::default())?.expected_drawdown)
}

/// Exact probability that the drawdown statistics satisfy `event`.
pub fn exact_probability<F>(
    model: &GambleModel,
    k: &[f64],
    steps: usize,
    budget: u64,
    event: F,
) -> Result<f64>
where
    F: Fn(&DrawdownStats) -> bool + Sync + Send,
{
    check_budget(model, steps, budget)?;
    fold_sequences(
        model,
        k,
        steps,
        Execution::default(),
        || 0.0,
        |acc, p, s| {
            if event(s) {
                *acc += p;
            }
        },
        |a, b| a + b,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drawdown::path::drawdown_of_values;
    use crate::gamble::make_coin;

    #[test]
    fn zero_allocation() {
        let m = make_coin(1.0, -1.0, 0.9).unwrap();
        let s = exact_summary(&m, &[0.0], 8, ENUMERATION_BUDGET, Execution::Sequential).unwrap();
        assert_eq!(s.expected_drawdown, 0.0);
        assert_eq!(s.expected_log_complementary, 0.0);
        assert_eq!(s.sequences, 256);
    }

    #[test]
    fn three_step_coin_by_hand() {
        // coin(1,-1,0.9), K = 0.5: wealth factors 1.5 / 0.5.
        // Sequences with their drawdown:
        //   WWW 0, WWL .5, WLW .5, WLL .75, LWW .5, LWL .625, LLW .75, LLL .875
        let p: f64 = 0.9;
        let q: f64 = 0.1;
        let hand = p * p * q * 0.5
            + p * q * p * 0.5
            + p * q * q * 0.75
            + q * p * p * 0.5
            + q * p * q * 0.625
            + q * q * p * 0.75
            + q * q * q * 0.875;
        // LWL: 1 → .5 → .75 → .375; peak 1 so D = .625
        let m = make_coin(1.0, -1.0, 0.9).unwrap();
        let e = expected_drawdown_exact(&m, &[0.5], 3).unwrap();
        assert!((e - hand).abs() < 1e-15, "{e} vs {hand}");
        assert!((e - 0.1415).abs() < 1e-12);
        assert_eq!(drawdown_of_values(&[1.0, 0.5, 0.75, 0.375]).max_drawdown, 0.625);
    }

    #[test]
    fn analytic_formula_by_enumeration() {
        let m = make_coin(1.0, -1.0, 0.9).unwrap();
        let k = 0.37;
        let prob = exact_probability(&m, &[k], 10, ENUMERATION_BUDGET, |s| {
            s.max_drawdown >= k - 1e-12
        })
        .unwrap();
        assert!((prob - (1.0 - 0.9f64.powi(10))).abs() < 1e-12);
    }

    #[test]
    fn budget_is_enforced() {
        let m = make_coin(1.0, -1.0, 0.9).unwrap();
        assert!(matches!(
            expected_drawdown_exact(&m, &[0.5], 21),
            Err(Error::BudgetExceeded { required: 2_097_152, .. })
        ));
        assert_eq!(sequence_count(&m, 2000), u64::MAX);
    }

    #[test]
    fn ruin_makes_log_complementary_infinite() {
        let m = make_coin(1.0, -1.0, 0.9).unwrap();
        let s = exact_summary(&m, &[1.0], 4, ENUMERATION_BUDGET, Execution::Sequential).unwrap();
        assert_eq!(s.expected_log_complementary, f64::NEG_INFINITY);
        assert!((s.expected_drawdown - (1.0 - 0.9f64.powi(4))).abs() < 1e-15);
    }

    #[test]
    fn sequential_and_parallel_agree_bitwise() {
        let m = make_coin(0.15, -0.95, 0.95).unwrap();
        let a = exact_summary(&m, &[0.4], 12, ENUMERATION_BUDGET, Execution::Sequential).unwrap();
        let b = exact_summary(&m, &[0.4], 12, ENUMERATION_BUDGET, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }
}
