//! Expected log-growth, its gradient, and exact maximisation over the
//! survival-feasible simplex.

use serde::{Deserialize, Serialize};

use crate::config::{MAX_ASCENT_ITERATIONS, STABLE_ITERATIONS, SURVIVAL_MARGIN};
use crate::gamble::{dot, is_feasible, Allocation, GambleModel};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthResult {
    pub k_star: Allocation,
    /// Expected log-growth at `k_star`, nats per period.
    pub g_star: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// `g(K) = Σ p log(1 + Kᵀx)`.
///
/// Returns `f64::NEG_INFINITY` when some atom wipes the bettor out
/// (`1 + Kᵀx = 0`), so boundary allocations remain comparable.
pub fn log_growth(k: &[f64], model: &GambleModel) -> Result<f64> {
    if !is_feasible(k, model)? {
        return Err(Error::Infeasible(k.to_vec()));
    }
    Ok(log_growth_unchecked(k, model))
}

pub(crate) fn log_growth_unchecked(k: &[f64], model: &GambleModel) -> f64 {
    let mut g = 0.0;
    for a in model.atoms() {
        let w = 1.0 + dot(k, &a.x);
        if w <= 0.0 {
            return f64::NEG_INFINITY;
        }
        g += a.p * w.ln();
    }
    g
}

/// `∂g/∂K_i = Σ p x_i / (1 + Kᵀx)`; requires every wealth factor positive.
pub fn growth_gradient(k: &[f64], model: &GambleModel) -> Result<Vec<f64>> {
    model.check_dim(k)?;
    if model.min_wealth_factor(k) <= 0.0 {
        return Err(Error::OnSurvivalBoundary(k.to_vec()));
    }
    Ok(gradient_unchecked(k, model))
}

fn gradient_unchecked(k: &[f64], model: &GambleModel) -> Vec<f64> {
    let mut grad = vec![0.0; k.len()];
    for a in model.atoms() {
        let w = a.p / (1.0 + dot(k, &a.x));
        for (g, x) in grad.iter_mut().zip(&a.x) {
            *g += w * x;
        }
    }
    grad
}

/// Annualised rate `(e^g - 1) / Δt` for a betting interval of `dt_years`.
pub fn annualized_return(g: f64, dt_years: f64) -> f64 {
    debug_assert!(dt_years > 0.0);
    g.exp_m1() / dt_years
}

/// Maximises `g` over `{K ≥ 0, ΣK ≤ 1, min Kᵀx ≥ -1}`.
///
/// One-dimensional models are solved by bisection on `g'`; otherwise
/// projected gradient ascent with Barzilai–Borwein trial steps and Armijo
/// backtracking. Trial points closer than [`SURVIVAL_MARGIN`] to the
/// survival boundary are rejected by shortening the step, so iterates stay
/// strictly inside the region where `g` is finite.
pub fn maximize_growth(model: &GambleModel, tol: f64) -> Result<GrowthResult> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::invalid(format!("tolerance {tol} must be positive")));
    }
    if model.dim() == 1 {
        Ok(bisect_scalar(model, tol))
    } else {
        Ok(projected_ascent(model, tol))
    }
}

fn scalar_slope(k: f64, model: &GambleModel) -> f64 {
    model
        .atoms()
        .iter()
        .map(|a| a.p * a.x[0] / (1.0 + k * a.x[0]))
        .sum()
}

fn bisect_scalar(model: &GambleModel, tol: f64) -> GrowthResult {
    let finish = |k: f64, iterations: usize| GrowthResult {
        g_star: log_growth_unchecked(&[k], model),
        k_star: Allocation::scalar(k),
        iterations,
        converged: true,
    };
    // g is concave, so g' is decreasing on [0, 1]. Outcomes are ≥ -1, hence
    // the largest feasible scalar fraction is always 1.
    if scalar_slope(0.0, model) <= 0.0 {
        return finish(0.0, 0);
    }
    let ruin_at_one = model.min_wealth_factor(&[1.0]) <= 0.0;
    if !ruin_at_one && scalar_slope(1.0, model) >= 0.0 {
        return finish(1.0, 0);
    }
    let target = tol.min(1e-12);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut iterations = 0;
    while hi - lo > target && iterations < 200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if scalar_slope(mid, model) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    finish(0.5 * (lo + hi), iterations)
}

fn projected_ascent(model: &GambleModel, tol: f64) -> GrowthResult {
    let n = model.dim();
    let mut k = vec![0.0; n];
    let mut g = log_growth_unchecked(&k, model);
    let mut grad = gradient_unchecked(&k, model);
    let mut step = 1.0;
    let mut stable = 0;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < MAX_ASCENT_ITERATIONS {
        let residual = projected_residual(&k, &grad);
        if residual <= tol && stable >= STABLE_ITERATIONS {
            converged = true;
            break;
        }
        iterations += 1;

        let mut t = step;
        let accepted = loop {
            let trial = project_capped_simplex(&axpy(&k, t, &grad));
            if model.min_wealth_factor(&trial) >= SURVIVAL_MARGIN {
                let g_trial = log_growth_unchecked(&trial, model);
                let lift: f64 = grad.iter().zip(&trial).zip(&k).map(|((d, a), b)| d * (a - b)).sum();
                if g_trial >= g + 1e-4 * lift {
                    break Some((trial, g_trial));
                }
            }
            t *= 0.5;
            if t < 1e-30 {
                break None;
            }
        };
        let Some((next, g_next)) = accepted else {
            converged = residual <= tol;
            break;
        };

        let grad_next = gradient_unchecked(&next, model);
        let s: Vec<f64> = next.iter().zip(&k).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = grad_next.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let ss = dot(&s, &s);
        // concave objective: sᵀy ≤ 0 along any step
        step = if sy < 0.0 && ss > 0.0 {
            (ss / -sy).clamp(1e-10, 1e10)
        } else {
            (t * 2.0).min(1e10)
        };

        let change = (g_next - g).abs() / g.abs().max(1.0);
        stable = if change <= tol { stable + 1 } else { 0 };
        k = next;
        g = g_next;
        grad = grad_next;
    }

    GrowthResult {
        k_star: Allocation(k),
        g_star: g,
        iterations,
        converged,
    }
}

/// `‖K - P(K + ∇g)‖∞`, zero exactly at a stationary point of the
/// simplex-constrained problem.
fn projected_residual(k: &[f64], grad: &[f64]) -> f64 {
    project_capped_simplex(&axpy(k, 1.0, grad))
        .iter()
        .zip(k)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

fn axpy(x: &[f64], t: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(a, b)| a + t * b).collect()
}

/// Euclidean projection onto `{K ≥ 0, ΣK ≤ 1}`.
pub fn project_capped_simplex(v: &[f64]) -> Vec<f64> {
    let clipped: Vec<f64> = v.iter().map(|&x| x.max(0.0)).collect();
    if clipped.iter().sum::<f64>() <= 1.0 {
        return clipped;
    }
    // Projection onto the unit simplex: find the shift θ with Σ(v - θ)⁺ = 1.
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - 1.0) / (i + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}
