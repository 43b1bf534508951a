//! Adaptive Kelly betting on a coin with unknown win probability.
//!
//! The bettor watches the first `M` flips without betting, then each step
//! estimates `p̂(k)` as the fraction of wins among the last `M` outcomes and
//! stakes `K̂(k) = SAT[2p̂(k) - 1]`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::approx::saturate;
use crate::drawdown::WealthPath;
use crate::gamble::make_coin;
use crate::par::path_rng;
use crate::{Error, Result};

/// Fraction of strictly positive outcomes in `outcomes[k-M..k]`.
pub fn estimate_p(outcomes: &[f64], k: usize, window: usize) -> Result<f64> {
    if window == 0 {
        return Err(Error::invalid("window must be positive"));
    }
    if k < window {
        return Err(Error::invalid(format!("index {k} is inside the training window {window}")));
    }
    if outcomes.len() < k {
        return Err(Error::invalid(format!("{} outcomes, index {k}", outcomes.len())));
    }
    let wins = outcomes[k - window..k].iter().filter(|&&x| x > 0.0).count();
    Ok(wins as f64 / window as f64)
}

/// `SAT[2p̂ - 1]`.
pub fn adaptive_fraction(p_hat: f64) -> f64 {
    saturate(2.0 * p_hat - 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveRun {
    pub window: usize,
    /// `p̂(k)` for the betting steps `k = M..N`.
    pub estimates: Vec<f64>,
    /// `K̂(k)` for the betting steps `k = M..N`.
    pub fractions: Vec<f64>,
    #[serde(skip)]
    pub path: WealthPath,
}

impl AdaptiveRun {
    pub fn steps(&self) -> usize {
        self.path.outcomes.len()
    }

    /// Fraction staked at step `k` (zero while training).
    pub fn fraction_at(&self, k: usize) -> f64 {
        if k < self.window {
            0.0
        } else {
            self.fractions[k - self.window]
        }
    }

    /// Per-step trace `k,outcome,p_hat,k_hat,wealth`. Row `k` holds the
    /// outcome of step `k`, the estimate and fraction used for it, and the
    /// wealth `V(k)` before it; the last row carries only `V(N)`.
    pub fn write_trace_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        out.write_record(["k", "outcome", "p_hat", "k_hat", "wealth"]).map_err(io)?;
        for (k, v) in self.path.values.iter().enumerate() {
            let row = if k < self.steps() {
                let p_hat = if k < self.window {
                    String::new()
                } else {
                    format!("{}", self.estimates[k - self.window])
                };
                [
                    k.to_string(),
                    format!("{}", self.path.outcomes[k][0]),
                    p_hat,
                    format!("{}", self.fraction_at(k)),
                    format!("{v}"),
                ]
            } else {
                [k.to_string(), String::new(), String::new(), String::new(), format!("{v}")]
            };
            out.write_record(&row).map_err(io)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Simulates `steps` flips of the even-money coin with win probability
/// `p_true`, betting adaptively after a training window of `window` flips.
pub fn run_adaptive(p_true: f64, steps: usize, window: usize, v0: f64, seed: u64) -> Result<AdaptiveRun> {
    if window == 0 || window >= steps {
        return Err(Error::invalid(format!("window {window} must lie in [1, {steps})")));
    }
    if !(v0 > 0.0 && v0.is_finite()) {
        return Err(Error::invalid(format!("initial wealth {v0} must be positive")));
    }
    let coin = make_coin(1.0, -1.0, p_true)?;
    let mut rng = path_rng(seed, 0);
    let outcomes: Vec<f64> = (0..steps).map(|_| coin.sample_outcome(&mut rng)[0]).collect();

    let mut values = Vec::with_capacity(steps + 1);
    let mut estimates = Vec::with_capacity(steps - window);
    let mut fractions = Vec::with_capacity(steps - window);
    let mut v = v0;
    values.push(v);
    // running count of wins in outcomes[k-M..k]
    let mut wins = outcomes[..window].iter().filter(|&&x| x > 0.0).count();
    for (k, &x) in outcomes.iter().enumerate() {
        let stake = if k < window {
            0.0
        } else {
            if k > window {
                wins += usize::from(outcomes[k - 1] > 0.0);
                wins -= usize::from(outcomes[k - 1 - window] > 0.0);
            }
            let p_hat = wins as f64 / window as f64;
            let f = adaptive_fraction(p_hat);
            estimates.push(p_hat);
            fractions.push(f);
            f
        };
        v *= (1.0 + stake * x).max(0.0);
        values.push(v);
    }
    Ok(AdaptiveRun {
        window,
        estimates,
        fractions,
        path: WealthPath {
            values,
            outcomes: outcomes.into_iter().map(|x| vec![x]).collect(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimator_examples() {
        assert_eq!(estimate_p(&[1.0, 1.0, 1.0], 3, 3).unwrap(), 1.0);
        assert_eq!(estimate_p(&[-1.0, -1.0], 2, 2).unwrap(), 0.0);
        assert_eq!(estimate_p(&[1.0, -1.0, 1.0, -1.0], 4, 4).unwrap(), 0.5);
        // zero is not a win
        assert_eq!(estimate_p(&[0.0, 1.0], 2, 2).unwrap(), 0.5);
        assert!(estimate_p(&[1.0; 5], 2, 3).is_err());
        assert!(estimate_p(&[1.0; 5], 7, 3).is_err());
    }

    #[test]
    fn fraction_examples() {
        assert_eq!(adaptive_fraction(0.5), 0.0);
        assert!((adaptive_fraction(0.6) - 0.2).abs() < 1e-15);
        assert_eq!(adaptive_fraction(0.3), 0.0);
        assert_eq!(adaptive_fraction(1.0), 1.0);
    }

    #[test]
    fn run_is_consistent() {
        let run = run_adaptive(0.6, 1000, 50, 1.0, 7).unwrap();
        let outcomes: Vec<f64> = run.path.outcomes.iter().map(|x| x[0]).collect();
        assert_eq!(run.estimates.len(), 950);
        for (i, &p) in run.estimates.iter().enumerate() {
            assert_eq!(p, estimate_p(&outcomes, i + 50, 50).unwrap());
        }
        for w in run.estimates.windows(2) {
            assert!((w[1] - w[0]).abs() <= 1.0 / 50.0 + 1e-15);
        }
        assert!(run.fractions.iter().all(|&f| (0.0..=1.0).contains(&f)));
        for (k, &x) in outcomes.iter().enumerate() {
            let expect = run.path.values[k] * (1.0 + run.fraction_at(k) * x).max(0.0);
            assert_eq!(run.path.values[k + 1], expect);
        }
        assert!(run.path.values[..=50].iter().all(|&v| v == 1.0));
    }

    #[test]
    fn fair_coin_barely_bets() {
        let run = run_adaptive(0.5, 1000, 50, 1.0, 3).unwrap();
        let mean_k: f64 = run.fractions.iter().sum::<f64>() / run.fractions.len() as f64;
        assert!(mean_k < 0.1, "mean fraction {mean_k}");
    }

    #[test]
    fn deterministic_trace() {
        let a = run_adaptive(0.6, 300, 50, 1.0, 99).unwrap();
        let b = run_adaptive(0.6, 300, 50, 1.0, 99).unwrap();
        let (mut x, mut y) = (Vec::new(), Vec::new());
        a.write_trace_csv(&mut x).unwrap();
        b.write_trace_csv(&mut y).unwrap();
        assert_eq!(x, y);
        let text = String::from_utf8(x).unwrap();
        assert!(text.starts_with("k,outcome,p_hat,k_hat,wealth\n0,"));
        assert_eq!(text.lines().count(), 302);
    }

    #[test]
    fn rejects_bad_window() {
        assert!(run_adaptive(0.6, 50, 50, 1.0, 0).is_err());
        assert!(run_adaptive(0.6, 50, 0, 1.0, 0).is_err());
        assert!(run_adaptive(1.0, 100, 10, 1.0, 0).is_err());
    }
}
