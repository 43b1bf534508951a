//! Empirical convexity checks of drawdown constraint level sets.
//!
//! The level set is estimated on a grid over the two-gamble simplex using
//! common random numbers, then midpoints of randomly chosen in-set pairs are
//! tested for membership. A midpoint outside the set is a violation; it is
//! significant only when it lies more than three standard errors beyond
//! the boundary. Violations are reported as data, not treated as errors.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::constrained::ConstraintSpec;
use super::monte_carlo::{MonteCarloConfig, Scenarios};
use crate::config::CONFIDENCE_SIGMAS;
use crate::gamble::{is_feasible, GambleModel};
use crate::par::path_rng;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub k: Vec<f64>,
    pub estimate: f64,
    pub std_error: f64,
    /// Point estimate on the admitted side of the boundary.
    pub in_set: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MidpointCheck {
    /// Indices into the grid of the two endpoints.
    pub a: usize,
    pub b: usize,
    pub midpoint: Vec<f64>,
    pub estimate: f64,
    pub std_error: f64,
    pub in_set: bool,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub spec: ConstraintSpec,
    pub steps: usize,
    pub grid: Vec<GridPoint>,
    pub checks: Vec<MidpointCheck>,
    pub violations: usize,
    pub significant_violations: usize,
    /// Violations within three standard errors of the boundary.
    pub inconclusive: usize,
}

impl ProbeReport {
    pub fn in_set_count(&self) -> usize {
        self.grid.iter().filter(|p| p.in_set).count()
    }

    /// `k1,k2,estimate,std_error,in_set` per grid point.
    pub fn write_grid_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let dim = self.grid.first().map_or(0, |p| p.k.len());
        let mut header: Vec<String> = (1..=dim).map(|i| format!("k{i}")).collect();
        header.extend(["estimate", "std_error", "in_set"].map(String::from));
        out.write_record(&header).map_err(csv_err)?;
        for p in &self.grid {
            let mut row: Vec<String> = p.k.iter().map(|v| format!("{v}")).collect();
            row.push(format!("{}", p.estimate));
            row.push(format!("{}", p.std_error));
            row.push(p.in_set.to_string());
            out.write_record(&row).map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Survival-feasible points `K = j/R` with `Σj ≤ R`, in lexicographic order.
pub fn simplex_grid(model: &GambleModel, resolution: usize) -> Result<Vec<Vec<f64>>> {
    if resolution == 0 {
        return Err(Error::invalid("grid resolution must be positive"));
    }
    fn fill(prefix: &mut Vec<usize>, left: usize, dim: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == dim {
            out.push(prefix.clone());
            return;
        }
        for j in 0..=left {
            prefix.push(j);
            fill(prefix, left - j, dim, out);
            prefix.pop();
        }
    }
    let mut idx = Vec::new();
    fill(&mut Vec::new(), resolution, model.dim(), &mut idx);
    let mut grid = Vec::with_capacity(idx.len());
    for j in idx {
        let k: Vec<f64> = j.iter().map(|&v| v as f64 / resolution as f64).collect();
        if is_feasible(&k, model)? {
            grid.push(k);
        }
    }
    Ok(grid)
}

pub(crate) fn evaluate_grid(
    model: &GambleModel,
    sc: &Scenarios,
    spec: &ConstraintSpec,
    grid: Vec<Vec<f64>>,
) -> Result<Vec<GridPoint>> {
    grid.into_iter()
        .map(|k| {
            let est = spec.statistic(&sc.drawdowns(model, &k)?);
            Ok(GridPoint {
                in_set: spec.margin(est.value) >= 0.0,
                estimate: est.value,
                std_error: est.std_error,
                k,
            })
        })
        .collect()
}

pub(crate) fn probe_from_grid(
    model: &GambleModel,
    sc: &Scenarios,
    spec: &ConstraintSpec,
    grid: Vec<GridPoint>,
    pair_samples: usize,
    seed: u64,
) -> Result<ProbeReport> {
    let members: Vec<usize> = (0..grid.len()).filter(|&i| grid[i].in_set).collect();
    let mut checks = Vec::new();
    if members.len() >= 2 {
        // Stream u64::MAX is never used by a simulated path.
        let mut rng = path_rng(seed, u64::MAX);
        for _ in 0..pair_samples {
            let ia = rng.random_range(0..members.len());
            let mut ib = rng.random_range(0..members.len() - 1);
            if ib >= ia {
                ib += 1;
            }
            let (a, b) = (members[ia], members[ib]);
            let midpoint: Vec<f64> = grid[a].k.iter().zip(&grid[b].k).map(|(x, y)| 0.5 * (x + y)).collect();
            let est = spec.statistic(&sc.drawdowns(model, &midpoint)?);
            let margin = spec.margin(est.value);
            let in_set = margin >= 0.0;
            checks.push(MidpointCheck {
                a,
                b,
                midpoint,
                estimate: est.value,
                std_error: est.std_error,
                in_set,
                significant: !in_set && -margin > CONFIDENCE_SIGMAS * est.std_error,
            });
        }
    }
    let violations = checks.iter().filter(|c| !c.in_set).count();
    let significant_violations = checks.iter().filter(|c| c.significant).count();
    Ok(ProbeReport {
        spec: *spec,
        steps: sc.steps(),
        grid,
        checks,
        violations,
        significant_violations,
        inconclusive: violations - significant_violations,
    })
}

/// Grid estimate of a two-gamble constraint set plus randomized midpoint
/// membership tests.
pub fn convexity_probe(
    model: &GambleModel,
    steps: usize,
    spec: &ConstraintSpec,
    grid_resolution: usize,
    pair_samples: usize,
    mc: &MonteCarloConfig,
) -> Result<ProbeReport> {
    if model.dim() != 2 {
        return Err(Error::invalid(format!(
            "convexity probe needs a two-gamble model, got {} gambles",
            model.dim()
        )));
    }
    if grid_resolution < 20 {
        return Err(Error::invalid("grid resolution must be at least 20"));
    }
    let sc = Scenarios::generate(model, steps, mc)?;
    let grid = evaluate_grid(model, &sc, spec, simplex_grid(model, grid_resolution)?)?;
    probe_from_grid(model, &sc, spec, grid, pair_samples, mc.seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drawdown::constrained::ConstraintKind;
    use crate::drawdown::path::drawdown_of_values;
    use crate::gamble::{independent, make_coin, Atom};

    #[test]
    fn grid_covers_simplex() {
        let c = make_coin(1.0, -1.0, 0.9).unwrap();
        let m = independent(&[c.clone(), c]).unwrap();
        let g = simplex_grid(&m, 20).unwrap();
        assert_eq!(g.len(), 21 * 22 / 2);
        assert!(g.iter().all(|k| k.iter().sum::<f64>() <= 1.0 + 1e-12));
    }

    #[test]
    fn rejects_wrong_dimension_and_coarse_grid() {
        let c = make_coin(1.0, -1.0, 0.9).unwrap();
        let spec = ConstraintSpec::expected(0.3).unwrap();
        let mc = MonteCarloConfig::new(100, 0);
        assert!(convexity_probe(&c, 10, &spec, 20, 10, &mc).is_err());
        let m = independent(&[c.clone(), c]).unwrap();
        assert!(convexity_probe(&m, 10, &spec, 10, 10, &mc).is_err());
    }

    #[test]
    fn nearly_vacuous_constraint_is_convex() {
        // ε close to 1 admits every survival-feasible point except those
        // that are ruined on almost every path.
        let c = make_coin(1.0, -1.0, 0.9).unwrap();
        let m = independent(&[c.clone(), c]).unwrap();
        let spec = ConstraintSpec::expected(1.0 - 1e-9).unwrap();
        let r = convexity_probe(&m, 20, &spec, 20, 100, &MonteCarloConfig::new(200, 1)).unwrap();
        assert_eq!(r.significant_violations, 0);
        assert!(r.in_set_count() > 200);
    }

    #[test]
    fn deterministic_model_matches_direct_computation() {
        // One atom (0.1, -0.2): every path is the same, D has no noise.
        let m = GambleModel::new(vec![Atom::new(vec![0.1, -0.2], 1.0)]).unwrap();
        let spec = ConstraintSpec::expected(0.5).unwrap();
        let steps = 5;
        let r = convexity_probe(&m, steps, &spec, 20, 100, &MonteCarloConfig::new(100, 2)).unwrap();
        for p in &r.grid {
            let f = 1.0 + 0.1 * p.k[0] - 0.2 * p.k[1];
            let values: Vec<f64> = (0..=steps).map(|i| f.powi(i as i32)).collect();
            let d = drawdown_of_values(&values).max_drawdown;
            assert!((p.estimate - d).abs() < 1e-12);
            assert!(p.std_error < 1e-15);
            assert_eq!(p.in_set, d <= 0.5);
        }
        assert_eq!(r.violations, 0);
        assert_eq!(spec.kind, ConstraintKind::Expected);
    }

    #[test]
    fn csv_layout() {
        let c = make_coin(1.0, -1.0, 0.9).unwrap();
        let m = independent(&[c.clone(), c]).unwrap();
        let spec = ConstraintSpec::expected(0.3).unwrap();
        let r = convexity_probe(&m, 10, &spec, 20, 5, &MonteCarloConfig::new(100, 1)).unwrap();
        let mut buf = Vec::new();
        r.write_grid_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("k1,k2,estimate,std_error,in_set"));
        assert_eq!(lines.count(), r.grid.len());
    }
}
