//! Closed-form approximate Kelly fractions and their feasibility repairs.
//!
//! The Taylor fraction maximises `KᵀE[X] - ½KᵀΣ(X)K` and the GBM fraction
//! uses the covariance in place of the second moment. Neither respects the
//! feasible set, so they are repaired by saturation (one gamble) or by
//! clipping negatives and rescaling along the ray (several gambles).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::config::{FEASIBILITY_SLACK, SINGULAR_RCOND};
use crate::gamble::{is_feasible, Allocation, GambleModel};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ApproxMethod {
    Taylor,
    Gbm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Repair {
    None,
    Saturation,
    Projection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxSolution {
    pub method: ApproxMethod,
    pub kappa_raw: Vec<f64>,
    pub k_repaired: Allocation,
    pub repair: Repair,
}

/// `κ = Σ(X)⁻¹ E[X]` with `Σ(X) = E[XXᵀ]`.
pub fn taylor_solution(model: &GambleModel) -> Result<Vec<f64>> {
    let m = model.moments();
    solve(&m.second_moment, &m.mean, "second-moment")
}

/// `κ = Σ̄(X)⁻¹ E[X]` with `Σ̄(X)` the covariance.
pub fn gbm_solution(model: &GambleModel) -> Result<Vec<f64>> {
    let m = model.moments();
    solve(&m.covariance, &m.mean, "covariance")
}

fn solve(a: &DMatrix<f64>, b: &DVector<f64>, what: &'static str) -> Result<Vec<f64>> {
    let sv = a.singular_values();
    let max = sv.max();
    if max.is_nan() || max <= 0.0 || sv.min() / max < SINGULAR_RCOND {
        return Err(Error::SingularMatrix(what));
    }
    let x = a.clone().lu().solve(b).ok_or(Error::SingularMatrix(what))?;
    Ok(x.iter().copied().collect())
}

/// Clamp to `[0, 1]`.
pub fn saturate(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// `K_i / ΣK_j`: rescales a nonnegative vector onto `ΣK = 1` keeping ratios.
pub fn project_simplex_ray(k: &[f64]) -> Result<Vec<f64>> {
    if let Some(v) = k.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::invalid(format!("ray projection needs nonnegative components, got {v}")));
    }
    let sum: f64 = k.iter().sum();
    if sum == 0.0 {
        return Err(Error::invalid("ray projection of the zero vector"));
    }
    Ok(k.iter().map(|v| v / sum).collect())
}

/// Makes a raw approximate fraction feasible.
///
/// One gamble: saturation. Several: negatives are clipped to zero, then the
/// vector is ray-projected only if its sum still exceeds one. A raw vector
/// that is already feasible passes through untouched.
pub fn repair(kappa: &[f64], model: &GambleModel) -> Result<(Allocation, Repair)> {
    if is_feasible(kappa, model)? {
        return Ok((Allocation(kappa.to_vec()), Repair::None));
    }
    if kappa.len() == 1 {
        return Ok((Allocation::scalar(saturate(kappa[0])), Repair::Saturation));
    }
    let clipped: Vec<f64> = kappa.iter().map(|v| v.max(0.0)).collect();
    if clipped.iter().sum::<f64>() > 1.0 + FEASIBILITY_SLACK {
        Ok((Allocation(project_simplex_ray(&clipped)?), Repair::Projection))
    } else {
        Ok((Allocation(clipped), Repair::Saturation))
    }
}

pub fn approximate(model: &GambleModel, method: ApproxMethod) -> Result<ApproxSolution> {
    let kappa_raw = match method {
        ApproxMethod::Taylor => taylor_solution(model)?,
        ApproxMethod::Gbm => gbm_solution(model)?,
    };
    let (k_repaired, repair) = repair(&kappa_raw, model)?;
    Ok(ApproxSolution {
        method,
        kappa_raw,
        k_repaired,
        repair,
    })
}

/// Unsaturated Taylor fraction for the gamble paying `γ` w.p. `p`, `-1` otherwise:
/// `(pγ + p - 1) / (pγ² - p + 1)`.
pub fn taylor_gain_unsaturated(gamma: f64, p: f64) -> f64 {
    (p * gamma + p - 1.0) / (p * gamma * gamma - p + 1.0)
}

/// Saturated Taylor fraction as a function of the reward level `γ`.
pub fn taylor_gain_curve(gamma: f64, p: f64) -> f64 {
    saturate(taylor_gain_unsaturated(gamma, p))
}

/// Closed-form `d/dγ` of the unsaturated curve:
/// `-p (pγ² + 2(p-1)γ + p - 1) / (pγ² - p + 1)²`.
pub fn taylor_gain_slope(gamma: f64, p: f64) -> f64 {
    let den = p * gamma * gamma - p + 1.0;
    -p * (p * gamma * gamma + 2.0 * (p - 1.0) * gamma + p - 1.0) / (den * den)
}

/// Reward level beyond which the Taylor fraction shrinks as the reward grows:
/// `γ*(p) = (1 - p + √(1 - p)) / p`.
pub fn inefficiency_threshold(p: f64) -> f64 {
    (1.0 - p + (1.0 - p).sqrt()) / p
}

/// Concrete evidence that the Taylor fraction is not monotone in the reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InefficiencyReport {
    pub p: f64,
    pub threshold: f64,
    /// `(γ₁, K(γ₁))` and `(γ₂, K(γ₂))` with `γ₂ > γ₁`, both fractions in
    /// `(0, 1)` and `K(γ₂) < K(γ₁)`.
    pub witness_low: (f64, f64),
    pub witness_high: (f64, f64),
}

pub fn inefficiency_report(p: f64) -> Result<InefficiencyReport> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("probability {p} must lie in (0, 1)")));
    }
    let threshold = inefficiency_threshold(p);
    // The unsaturated curve peaks at γ* and decreases toward 0 afterwards;
    // walk right until it drops below 1 so saturation is inactive.
    let mut g1 = threshold;
    for _ in 0..200 {
        let k1 = taylor_gain_unsaturated(g1, p);
        if k1 > 0.0 && k1 < 1.0 {
            let g2 = 2.0 * g1;
            let k2 = taylor_gain_unsaturated(g2, p);
            return Ok(InefficiencyReport {
                p,
                threshold,
                witness_low: (g1, k1),
                witness_high: (g2, k2),
            });
        }
        g1 *= 1.5;
    }
    Err(Error::invalid(format!("no inefficiency witness found for p = {p}")))
}
