//! Log-growth maximisation under drawdown constraints.

use log::warn;
use serde::{Deserialize, Serialize};

use super::exact::{exact_summary, sequence_count};
use super::monte_carlo::{Estimate, MonteCarloConfig, Scenarios};
use super::path::DrawdownStats;
use super::probe::{evaluate_grid, probe_from_grid, simplex_grid, ProbeReport};
use crate::config::{CONFIDENCE_SIGMAS, ENUMERATION_BUDGET};
use crate::gamble::{is_feasible, GambleModel};
use crate::growth::{growth_gradient, log_growth_unchecked, maximize_growth, project_capped_simplex, GrowthResult};
use crate::{Allocation, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintKind {
    /// `E[D(K)] ≤ ε`
    Expected,
    /// `P(D(K) ≤ ε) ≥ 1 - δ`
    Probabilistic,
    /// `E[log D̄(K)] ≥ log(1 - ε)`
    Surrogate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSpec {
    pub kind: ConstraintKind,
    pub epsilon: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

impl ConstraintSpec {
    pub fn new(kind: ConstraintKind, epsilon: f64, delta: Option<f64>) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::invalid(format!("epsilon {epsilon} must lie in (0, 1)")));
        }
        let delta = match (kind, delta) {
            (ConstraintKind::Probabilistic, Some(d)) if d > 0.0 && d < 1.0 => Some(d),
            (ConstraintKind::Probabilistic, Some(d)) => {
                return Err(Error::invalid(format!("delta {d} must lie in (0, 1)")))
            }
            (ConstraintKind::Probabilistic, None) => {
                return Err(Error::invalid("probabilistic constraint needs delta"))
            }
            (_, _) => None,
        };
        Ok(ConstraintSpec {
            kind,
            epsilon,
            delta,
        })
    }

    pub fn expected(epsilon: f64) -> Result<Self> {
        Self::new(ConstraintKind::Expected, epsilon, None)
    }

    pub fn probabilistic(epsilon: f64, delta: f64) -> Result<Self> {
        Self::new(ConstraintKind::Probabilistic, epsilon, Some(delta))
    }

    pub fn surrogate(epsilon: f64) -> Result<Self> {
        Self::new(ConstraintKind::Surrogate, epsilon, None)
    }

    /// The constrained quantity estimated from per-path statistics.
    pub fn statistic(&self, samples: &[DrawdownStats]) -> Estimate {
        match self.kind {
            ConstraintKind::Expected => {
                let d: Vec<f64> = samples.iter().map(|s| s.max_drawdown).collect();
                Estimate::from_samples(&d)
            }
            ConstraintKind::Probabilistic => {
                Estimate::frequency(samples, |s| s.max_drawdown <= self.epsilon)
            }
            ConstraintKind::Surrogate => {
                let v: Vec<f64> = samples.iter().map(|s| s.log_complementary).collect();
                Estimate::from_samples(&v)
            }
        }
    }

    /// Signed distance of a point estimate from the constraint boundary,
    /// positive inside the constraint set.
    pub fn margin(&self, value: f64) -> f64 {
        match self.kind {
            ConstraintKind::Expected => self.epsilon - value,
            ConstraintKind::Probabilistic => value - (1.0 - self.delta.unwrap_or(0.0)),
            ConstraintKind::Surrogate => value - (1.0 - self.epsilon).ln(),
        }
    }

    /// Whether an estimate certifies the constraint. The probabilistic form
    /// requires the lower band `estimate - 3·SE` to clear `1 - δ`.
    pub fn admits(&self, est: &Estimate) -> bool {
        match self.kind {
            ConstraintKind::Probabilistic => {
                self.margin(est.value - CONFIDENCE_SIGMAS * est.std_error) >= 0.0
            }
            _ => self.margin(est.value) >= 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Evaluation {
    Exact,
    MonteCarlo,
}

/// `E[log D̄(K)]` with a record of how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogComplementary {
    pub value: f64,
    /// Zero for exact enumeration.
    pub std_error: f64,
    pub evaluation: Evaluation,
    /// Set when enumeration exceeded its budget and Monte Carlo was used.
    pub budget_exceeded: bool,
}

/// Exact `E[log D̄(K)]` when `atoms^N` fits `budget`, otherwise a Monte Carlo
/// estimate flagged in the result.
pub fn expected_log_complementary(
    model: &GambleModel,
    k: &[f64],
    steps: usize,
    budget: u64,
    mc: &MonteCarloConfig,
) -> Result<LogComplementary> {
    if sequence_count(model, steps) <= budget {
        let s = exact_summary(model, k, steps, budget, mc.execution)?;
        return Ok(LogComplementary {
            value: s.expected_log_complementary,
            std_error: 0.0,
            evaluation: Evaluation::Exact,
            budget_exceeded: false,
        });
    }
    warn!("enumeration budget exceeded for N = {steps}; using Monte Carlo");
    let est = super::monte_carlo::expected_log_complementary_mc(model, k, steps, mc)?;
    Ok(LogComplementary {
        value: est.value,
        std_error: est.std_error,
        evaluation: Evaluation::MonteCarlo,
        budget_exceeded: true,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstrainedConfig {
    pub mc: MonteCarloConfig,
    /// Coarse grid spacing for one-dimensional Monte Carlo constraints.
    pub grid_step: f64,
    /// Golden-section refinement width.
    pub refine_tol: f64,
    /// Grid divisions per unit for the simplex scan when `n ≥ 2`.
    pub simplex_resolution: usize,
    /// Midpoint pairs sampled by the attached convexity probe (`n = 2`).
    pub probe_pairs: usize,
    pub enumeration_budget: u64,
    /// Tolerance of the unconstrained ascent.
    pub tol: f64,
}

impl ConstrainedConfig {
    pub fn new(mc: MonteCarloConfig) -> Self {
        ConstrainedConfig {
            mc,
            grid_step: 1e-2,
            refine_tol: 1e-4,
            simplex_resolution: 20,
            probe_pairs: 200,
            enumeration_budget: ENUMERATION_BUDGET,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstrainedMethod {
    /// The unconstrained optimum already satisfies the constraint.
    Unconstrained,
    /// Coarse grid plus golden-section refinement (one gamble).
    GridRefine,
    /// Grid scan over the simplex (several gambles, no convexity assumed).
    GridScan,
    /// Bisection along `[0, K*]` on the concave surrogate (one gamble).
    SurrogateBisection,
    /// Projected ascent with radial feasibility restoration.
    SurrogateAscent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstrainedResult {
    pub growth: GrowthResult,
    pub unconstrained: GrowthResult,
    /// Constrained quantity at the returned allocation.
    pub constraint: Estimate,
    /// Margin from the boundary; for the probabilistic form it is measured
    /// from the conservative lower band.
    pub slack: f64,
    pub method: ConstrainedMethod,
    pub evaluation: Evaluation,
    pub probe: Option<ProbeReport>,
}

/// Evaluates the constrained quantity at arbitrary allocations with fixed
/// random numbers (or exactly).
enum Evaluator {
    Exact { budget: u64, mc: MonteCarloConfig },
    Sampled(Scenarios),
}

impl Evaluator {
    fn new(model: &GambleModel, steps: usize, spec: &ConstraintSpec, cfg: &ConstrainedConfig) -> Result<Self> {
        let exact_ok = spec.kind == ConstraintKind::Surrogate
            && sequence_count(model, steps) <= cfg.enumeration_budget;
        if exact_ok {
            Ok(Evaluator::Exact {
                budget: cfg.enumeration_budget,
                mc: cfg.mc,
            })
        } else {
            Ok(Evaluator::Sampled(Scenarios::generate(model, steps, &cfg.mc)?))
        }
    }

    fn kind(&self) -> Evaluation {
        match self {
            Evaluator::Exact { .. } => Evaluation::Exact,
            Evaluator::Sampled(_) => Evaluation::MonteCarlo,
        }
    }

    fn estimate(&self, model: &GambleModel, steps: usize, spec: &ConstraintSpec, k: &[f64]) -> Result<Estimate> {
        match self {
            Evaluator::Exact { budget, mc } => {
                let s = exact_summary(model, k, steps, *budget, mc.execution)?;
                Ok(Estimate {
                    value: s.expected_log_complementary,
                    std_error: 0.0,
                })
            }
            Evaluator::Sampled(sc) => Ok(spec.statistic(&sc.drawdowns(model, k)?)),
        }
    }
}

pub fn maximize_growth_constrained(
    model: &GambleModel,
    steps: usize,
    spec: &ConstraintSpec,
    cfg: &ConstrainedConfig,
) -> Result<ConstrainedResult> {
    if steps == 0 {
        return Err(Error::invalid("horizon must be at least one step"));
    }
    let unconstrained = maximize_growth(model, cfg.tol)?;
    let eval = Evaluator::new(model, steps, spec, cfg)?;
    let at = |k: &[f64]| eval.estimate(model, steps, spec, k);

    let finish = |growth: GrowthResult, method, probe| -> Result<ConstrainedResult> {
        let constraint = at(&growth.k_star)?;
        let band = if spec.kind == ConstraintKind::Probabilistic {
            constraint.value - CONFIDENCE_SIGMAS * constraint.std_error
        } else {
            constraint.value
        };
        Ok(ConstrainedResult {
            slack: spec.margin(band),
            constraint,
            growth,
            unconstrained: unconstrained.clone(),
            method,
            evaluation: eval.kind(),
            probe,
        })
    };

    if spec.admits(&at(&unconstrained.k_star)?) {
        return finish(unconstrained.clone(), ConstrainedMethod::Unconstrained, None);
    }

    let n = model.dim();
    match (spec.kind, n) {
        (ConstraintKind::Surrogate, 1) => {
            let k = radial_boundary(&unconstrained.k_star, |k| Ok(spec.admits(&at(k)?)))?;
            finish(point(model, k, 0, true), ConstrainedMethod::SurrogateBisection, None)
        }
        (ConstraintKind::Surrogate, _) => {
            let g = surrogate_ascent(model, &unconstrained.k_star, cfg.tol, |k| Ok(spec.admits(&at(k)?)))?;
            finish(g, ConstrainedMethod::SurrogateAscent, None)
        }
        (_, 1) => {
            let g = grid_refine(model, cfg, |k| Ok(spec.admits(&at(k)?)))?;
            finish(g, ConstrainedMethod::GridRefine, None)
        }
        (_, _) => {
            let Evaluator::Sampled(sc) = &eval else {
                unreachable!("drawdown constraints are always sampled")
            };
            let grid = simplex_grid(model, cfg.simplex_resolution)?;
            let points = evaluate_grid(model, sc, spec, grid)?;
            let best = points
                .iter()
                .filter(|p| spec.admits(&Estimate { value: p.estimate, std_error: p.std_error }))
                .map(|p| (log_growth_unchecked(&p.k, model), p))
                .fold(None::<(f64, &super::probe::GridPoint)>, |acc, (g, p)| match acc {
                    Some((bg, _)) if bg >= g => acc,
                    _ => Some((g, p)),
                })
                .ok_or(Error::EmptyFeasibleSet)?;
            let k = best.1.k.clone();
            let probe = if n == 2 {
                Some(probe_from_grid(model, sc, spec, points, cfg.probe_pairs, cfg.mc.seed)?)
            } else {
                None
            };
            finish(point(model, k, 0, true), ConstrainedMethod::GridScan, probe)
        }
    }
}

fn point(model: &GambleModel, k: Vec<f64>, iterations: usize, converged: bool) -> GrowthResult {
    GrowthResult {
        g_star: log_growth_unchecked(&k, model),
        k_star: Allocation(k),
        iterations,
        converged,
    }
}

/// Largest `s ∈ [0, 1]` (to ~1e-12) with `s·target` admitted, assuming
/// `0` is admitted and the admitted set is star-shaped about the origin.
fn radial_boundary<F>(target: &[f64], admits: F) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<bool>,
{
    let scaled = |s: f64| target.iter().map(|v| v * s).collect::<Vec<f64>>();
    if admits(target)? {
        return Ok(target.to_vec());
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if admits(&scaled(mid))? {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 {
            break;
        }
    }
    Ok(scaled(lo))
}

fn grid_refine<F>(model: &GambleModel, cfg: &ConstrainedConfig, admits: F) -> Result<GrowthResult>
where
    F: Fn(&[f64]) -> Result<bool>,
{
    let cells = (1.0 / cfg.grid_step).round().max(1.0) as usize;
    let mut best: Option<(f64, f64)> = None;
    for j in 0..=cells {
        let k = j as f64 / cells as f64;
        if !is_feasible(&[k], model)? || !admits(&[k])? {
            continue;
        }
        let g = log_growth_unchecked(&[k], model);
        if best.is_none_or(|(bg, _)| g > bg) {
            best = Some((g, k));
        }
    }
    let (mut best_g, mut best_k) = best.ok_or(Error::EmptyFeasibleSet)?;

    // Golden-section search on (admitted, growth-or-margin) ordered
    // lexicographically, within one grid cell either side of the best point.
    let step = 1.0 / cells as f64;
    let (mut a, mut b) = ((best_k - step).max(0.0), (best_k + step).min(1.0));
    let anchor = best_k;
    let score = |k: f64| -> Result<(bool, f64)> {
        if !is_feasible(&[k], model)? {
            return Ok((false, f64::NEG_INFINITY));
        }
        let ok = admits(&[k])?;
        // Infeasible side: prefer points closer to the admitted region.
        Ok((ok, if ok { log_growth_unchecked(&[k], model) } else { -(k - anchor).abs() }))
    };
    let better = |x: (bool, f64), y: (bool, f64)| (x.0 && !y.0) || (x.0 == y.0 && x.1 > y.1);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (score(c)?, score(d)?);
    let mut iterations = 0;
    while b - a > cfg.refine_tol && iterations < 100 {
        iterations += 1;
        for (k, f) in [(c, fc), (d, fd)] {
            if f.0 && f.1 > best_g {
                best_g = f.1;
                best_k = k;
            }
        }
        if better(fc, fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = score(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = score(d)?;
        }
    }
    for (k, f) in [(c, fc), (d, fd)] {
        if f.0 && f.1 > best_g {
            best_g = f.1;
            best_k = k;
        }
    }
    Ok(GrowthResult {
        k_star: Allocation::scalar(best_k),
        g_star: best_g,
        iterations,
        converged: b - a <= cfg.refine_tol,
    })
}

/// Projected gradient ascent on `g` over the constraint set. Trial points
/// that leave the set are pulled back along the ray to the origin, which is
/// always admitted.
fn surrogate_ascent<F>(model: &GambleModel, start: &[f64], tol: f64, admits: F) -> Result<GrowthResult>
where
    F: Fn(&[f64]) -> Result<bool>,
{
    let mut k = radial_boundary(start, &admits)?;
    let mut g = log_growth_unchecked(&k, model);
    let mut t = 1.0;
    let mut stable = 0;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < 5_000 {
        iterations += 1;
        let grad = growth_gradient(&k, model)?;
        let mut accepted = None;
        while t > 1e-14 {
            let raw: Vec<f64> = k.iter().zip(&grad).map(|(a, b)| a + t * b).collect();
            let trial = radial_boundary(&project_capped_simplex(&raw), &admits)?;
            let gt = log_growth_unchecked(&trial, model);
            if gt > g {
                accepted = Some((trial, gt));
                break;
            }
            t *= 0.5;
        }
        let Some((next, gn)) = accepted else {
            converged = true;
            break;
        };
        let change = (gn - g) / g.abs().max(1.0);
        stable = if change <= tol { stable + 1 } else { 0 };
        k = next;
        g = gn;
        t *= 2.0;
        if stable >= crate::config::STABLE_ITERATIONS {
            converged = true;
            break;
        }
    }
    Ok(point(model, k, iterations, converged))
}
