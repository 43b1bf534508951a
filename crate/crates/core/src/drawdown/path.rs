use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::gamble::{is_feasible, GambleModel};
use crate::{Error, Result};

/// Wealth `V(0..=N)` produced by `V(k+1) = (1 + KᵀX(k)) V(k)` together with
/// the outcomes `X(0..N)` that drove it. Zero wealth is absorbing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WealthPath {
    pub values: Vec<f64>,
    pub outcomes: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrawdownStats {
    /// `max_{l≤k} (V(l) - V(k)) / V(l)`.
    pub max_drawdown: f64,
    /// `min_{l≤k} V(k) / V(l)`.
    pub complementary: f64,
    /// `log(complementary)`, `-∞` after ruin.
    pub log_complementary: f64,
}

/// Single-pass running-peak tracker for both drawdown forms.
#[derive(Debug, Clone, Copy)]
pub struct DrawdownTracker {
    wealth: f64,
    peak: f64,
    max_drawdown: f64,
    min_ratio: f64,
}

impl DrawdownTracker {
    pub fn new(v0: f64) -> Self {
        DrawdownTracker {
            wealth: v0,
            peak: v0,
            max_drawdown: 0.0,
            min_ratio: 1.0,
        }
    }

    pub fn wealth(&self) -> f64 {
        self.wealth
    }

    /// Multiplies wealth by `factor` and updates the statistics.
    #[inline]
    pub fn step(&mut self, factor: f64) {
        self.observe(self.wealth * factor);
    }

    /// Records the next wealth value directly.
    #[inline]
    pub fn observe(&mut self, v: f64) {
        self.wealth = v;
        if v > self.peak {
            self.peak = v;
        } else {
            let dd = (self.peak - v) / self.peak;
            if dd > self.max_drawdown {
                self.max_drawdown = dd;
            }
            let ratio = v / self.peak;
            if ratio < self.min_ratio {
                self.min_ratio = ratio;
            }
        }
    }

    pub fn stats(&self) -> DrawdownStats {
        DrawdownStats {
            max_drawdown: self.max_drawdown,
            complementary: self.min_ratio,
            log_complementary: if self.min_ratio > 0.0 {
                self.min_ratio.ln()
            } else {
                f64::NEG_INFINITY
            },
        }
    }
}

pub fn simulate_path<R: Rng + ?Sized>(
    model: &GambleModel,
    k: &[f64],
    steps: usize,
    v0: f64,
    rng: &mut R,
) -> Result<WealthPath> {
    if !is_feasible(k, model)? {
        return Err(Error::Infeasible(k.to_vec()));
    }
    if steps == 0 {
        return Err(Error::invalid("horizon must be at least one step"));
    }
    if !(v0 > 0.0 && v0.is_finite()) {
        return Err(Error::invalid(format!("initial wealth {v0} must be positive")));
    }
    let factors = model.wealth_factors(k);
    let mut values = Vec::with_capacity(steps + 1);
    let mut outcomes = Vec::with_capacity(steps);
    let mut v = v0;
    values.push(v);
    for _ in 0..steps {
        let i = model.sample_index(rng);
        v *= factors[i];
        values.push(v);
        outcomes.push(model.atoms()[i].x.clone());
    }
    Ok(WealthPath { values, outcomes })
}

/// Maximum and complementary drawdown of a path in one pass.
pub fn max_drawdown(path: &WealthPath) -> DrawdownStats {
    drawdown_of_values(&path.values)
}

pub fn drawdown_of_values(values: &[f64]) -> DrawdownStats {
    let mut it = values.iter();
    let Some(&v0) = it.next() else {
        return DrawdownTracker::new(1.0).stats();
    };
    let mut t = DrawdownTracker::new(v0);
    for &v in it {
        t.observe(v);
    }
    t.stats()
}

/// `P(D(K) ≥ K) = 1 - p^N` for the even-money coin bet with `K ∈ (0, 1)`:
/// any single loss already draws the account down by `K`.
pub fn coin_drawdown_probability(p: f64, steps: usize) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("probability {p} must lie in (0, 1)")));
    }
    if steps == 0 {
        return Err(Error::invalid("horizon must be at least one step"));
    }
    let n = i32::try_from(steps).map_err(|_| Error::invalid("horizon too large"))?;
    Ok(1.0 - p.powi(n))
}
