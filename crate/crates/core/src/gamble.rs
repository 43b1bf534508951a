//! Finite-support gambles, their moments and the feasible allocation set.

use std::fmt;
use std::ops::Deref;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{FEASIBILITY_SLACK, PROBABILITY_SUM_TOL};
use crate::market::Provenance;
use crate::{Error, Result};

/// One support point of the return vector together with its probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub x: Vec<f64>,
    pub p: f64,
}

impl Atom {
    pub fn new(x: Vec<f64>, p: f64) -> Self {
        Atom { x, p }
    }
}

/// Joint PMF of the per-period return vector `X ∈ ℝⁿ`.
///
/// Invariants checked at construction: at least one atom, every atom has the
/// same dimension, every probability is positive and they sum to one within
/// [`PROBABILITY_SUM_TOL`], and no outcome component is below `-1`.
/// Duplicate atoms are legal and kept as given.
#[derive(Debug, Clone)]
pub struct GambleModel {
    atoms: Vec<Atom>,
    dim: usize,
    sampler: WeightedIndex<f64>,
}

impl GambleModel {
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        let first = atoms.first().ok_or(Error::EmptyModel)?;
        let dim = first.x.len();
        if dim == 0 {
            return Err(Error::invalid("outcome vectors must have at least one component"));
        }
        for (i, atom) in atoms.iter().enumerate() {
            if atom.x.len() != dim {
                return Err(Error::AtomDimension {
                    atom: i,
                    found: atom.x.len(),
                    expected: dim,
                });
            }
            if !(atom.p.is_finite() && atom.p > 0.0) {
                return Err(Error::InvalidProbability { atom: i, p: atom.p });
            }
            for (j, &v) in atom.x.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFiniteOutcome { atom: i, component: j });
                }
                if v < -1.0 {
                    return Err(Error::OutcomeBelowTotalLoss {
                        atom: i,
                        component: j,
                        value: v,
                    });
                }
            }
        }
        let sum = compensated_sum(atoms.iter().map(|a| a.p));
        if (sum - 1.0).abs() > PROBABILITY_SUM_TOL {
            return Err(Error::ProbabilitySum { sum });
        }
        let sampler = WeightedIndex::new(atoms.iter().map(|a| a.p))
            .map_err(|e| Error::invalid(format!("atom weights: {e}")))?;
        Ok(GambleModel {
            atoms,
            dim,
            sampler,
        })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// Number of gambles `n`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    /// Index of one atom drawn according to the atom probabilities.
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.sampler.sample(rng)
    }

    /// One i.i.d. draw of the return vector.
    pub fn sample_outcome<R: Rng + ?Sized>(&self, rng: &mut R) -> &[f64] {
        &self.atoms[self.sample_index(rng)].x
    }

    /// `1 + Kᵀx` for every atom, in atom order. Negative values (only
    /// possible within the feasibility slack) are clamped to zero.
    pub fn wealth_factors(&self, k: &[f64]) -> Vec<f64> {
        self.atoms
            .iter()
            .map(|a| (1.0 + dot(k, &a.x)).max(0.0))
            .collect()
    }

    /// Smallest `1 + Kᵀx` over the support, without clamping.
    pub fn min_wealth_factor(&self, k: &[f64]) -> f64 {
        self.atoms
            .iter()
            .map(|a| 1.0 + dot(k, &a.x))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn check_dim(&self, k: &[f64]) -> Result<()> {
        if k.len() != self.dim {
            return Err(Error::AllocationDimension {
                found: k.len(),
                expected: self.dim,
            });
        }
        Ok(())
    }

    /// Exact moments as finite sums over the atoms.
    pub fn moments(&self) -> MomentSet {
        let n = self.dim;
        let mut mean = DVector::zeros(n);
        let mut second = DMatrix::zeros(n, n);
        for a in &self.atoms {
            let x = DVector::from_column_slice(&a.x);
            mean.axpy(a.p, &x, 1.0);
            second.ger(a.p, &x, &x, 1.0);
        }
        // (p·x_i)·x_j and (p·x_j)·x_i round differently
        second.fill_upper_triangle_with_lower_triangle();
        let mut covariance = &second - &mean * mean.transpose();
        covariance.fill_upper_triangle_with_lower_triangle();
        MomentSet {
            mean,
            second_moment: second,
            covariance,
        }
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    /// Parses `{"atoms": [{"x": [...], "p": ...}, ...]}`. An optional
    /// `provenance` block is accepted and ignored.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::ModelFile(e.to_string()))?;
        GambleModel::new(file.atoms)
    }

    pub fn to_json(&self, provenance: Option<&Provenance>) -> String {
        let file = ModelFile {
            atoms: self.atoms.clone(),
            provenance: provenance.cloned(),
        };
        serde_json::to_string_pretty(&file).expect("model serialises")
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    atoms: Vec<Atom>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<Provenance>,
}

/// `E[X]`, `Σ(X) = E[XXᵀ]` and `Σ̄(X) = Σ(X) - E[X]E[X]ᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSet {
    pub mean: DVector<f64>,
    pub second_moment: DMatrix<f64>,
    pub covariance: DMatrix<f64>,
}

/// Betting fractions `K ∈ ℝⁿ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Allocation(pub Vec<f64>);

impl Allocation {
    pub fn zeros(n: usize) -> Self {
        Allocation(vec![0.0; n])
    }

    pub fn scalar(k: f64) -> Self {
        Allocation(vec![k])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// `K_i ≥ 0`, `ΣK_i ≤ 1` and `min Kᵀx ≥ -1` over the support.
    pub fn is_feasible(&self, model: &GambleModel) -> Result<bool> {
        is_feasible(&self.0, model)
    }
}

impl Deref for Allocation {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for Allocation {
    fn from(v: Vec<f64>) -> Self {
        Allocation(v)
    }
}

impl fmt::Display for Allocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v:.4}")?;
        }
        write!(f, "]")
    }
}

pub fn is_feasible(k: &[f64], model: &GambleModel) -> Result<bool> {
    model.check_dim(k)?;
    let nonneg = k.iter().all(|&v| v >= -FEASIBILITY_SLACK);
    let budget = k.iter().sum::<f64>() <= 1.0 + FEASIBILITY_SLACK;
    let survives = model.min_wealth_factor(k) >= -FEASIBILITY_SLACK;
    Ok(nonneg && budget && survives)
}

/// Two-outcome gamble paying `win` with probability `p`, `loss` otherwise.
pub fn make_coin(win: f64, loss: f64, p: f64) -> Result<GambleModel> {
    if !(win.is_finite() && loss.is_finite()) {
        return Err(Error::invalid("coin outcomes must be finite"));
    }
    if loss < -1.0 {
        return Err(Error::OutcomeBelowTotalLoss {
            atom: 1,
            component: 0,
            value: loss,
        });
    }
    if loss >= win {
        return Err(Error::invalid(format!("coin loss {loss} must be below win {win}")));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("coin probability {p} must lie in (0, 1)")));
    }
    GambleModel::new(vec![Atom::new(vec![win], p), Atom::new(vec![loss], 1.0 - p)])
}

/// Joint model of independent gambles: the product distribution.
pub fn independent(models: &[GambleModel]) -> Result<GambleModel> {
    if models.is_empty() {
        return Err(Error::EmptyModel);
    }
    let mut atoms = vec![Atom::new(Vec::new(), 1.0)];
    for m in models {
        atoms = atoms
            .iter()
            .flat_map(|a| {
                m.atoms().iter().map(move |b| {
                    let mut x = a.x.clone();
                    x.extend_from_slice(&b.x);
                    Atom::new(x, a.p * b.p)
                })
            })
            .collect();
    }
    GambleModel::new(atoms)
}

/// Neumaier summation; equal-weight models with many atoms stay within
/// the probability tolerance.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        c += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
        sum = t;
    }
    sum + c
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::PSD_SLACK;
    use crate::par::path_rng;
    use proptest::prelude::*;

    #[test]
    fn coin_atoms() {
        let m = make_coin(1.0, -1.0, 0.6).unwrap();
        assert_eq!(m.atoms(), &[Atom::new(vec![1.0], 0.6), Atom::new(vec![-1.0], 0.4)]);
        let m = make_coin(0.15, -0.95, 0.95).unwrap();
        assert_eq!(m.atoms()[0], Atom::new(vec![0.15], 0.95));
        assert_eq!(m.atoms()[1].x, vec![-0.95]);
        assert!((m.atoms()[1].p - 0.05).abs() < 1e-15);
    }

    #[test]
    fn coin_rejects_bad_parameters() {
        assert!(matches!(
            make_coin(1.0, -1.5, 0.5),
            Err(Error::OutcomeBelowTotalLoss { .. })
        ));
        assert!(make_coin(1.0, 1.0, 0.5).is_err());
        assert!(make_coin(1.0, -1.0, 1.0).is_err());
        assert!(make_coin(1.0, -1.0, 0.0).is_err());
    }

    #[test]
    fn model_validation_reports_first_violation() {
        assert!(matches!(GambleModel::new(vec![]), Err(Error::EmptyModel)));
        let bad_sum = vec![Atom::new(vec![0.1], 0.5), Atom::new(vec![-0.1], 0.4)];
        assert!(matches!(GambleModel::new(bad_sum), Err(Error::ProbabilitySum { .. })));
        let bad_dim = vec![Atom::new(vec![0.1], 0.5), Atom::new(vec![-0.1, 0.0], 0.5)];
        assert!(matches!(
            GambleModel::new(bad_dim),
            Err(Error::AtomDimension { atom: 1, .. })
        ));
        let zero_p = vec![Atom::new(vec![0.1], 1.0), Atom::new(vec![-0.1], 0.0)];
        assert!(matches!(
            GambleModel::new(zero_p),
            Err(Error::InvalidProbability { atom: 1, .. })
        ));
        let ruinous = vec![Atom::new(vec![-1.01], 1.0)];
        assert!(matches!(
            GambleModel::new(ruinous),
            Err(Error::OutcomeBelowTotalLoss { .. })
        ));
        // exactly -1 is a legal total-loss outcome
        assert!(GambleModel::new(vec![Atom::new(vec![-1.0], 1.0)]).is_ok());
    }

    #[test]
    fn moments_of_lopsided_coin() {
        let m = make_coin(0.15, -0.95, 0.95).unwrap().moments();
        assert!((m.mean[0] - 0.095).abs() < 1e-15);
        assert!((m.second_moment[(0, 0)] - 0.0665).abs() < 1e-15);
        assert!((m.covariance[(0, 0)] - 0.057475).abs() < 1e-15);
    }

    #[test]
    fn moments_of_trivial_models() {
        let m = make_coin(0.5, -0.5, 0.5).unwrap().moments();
        assert_eq!(m.mean[0], 0.0);
        let m = make_coin(1.0, -1.0, 0.5).unwrap().moments();
        assert_eq!(m.mean[0], 0.0);
        assert_eq!(m.second_moment[(0, 0)], 1.0);
        let single = GambleModel::new(vec![Atom::new(vec![0.2, -0.3], 1.0)]).unwrap();
        let m = single.moments();
        assert_eq!(m.mean.as_slice(), &[0.2, -0.3]);
        assert!(m.covariance.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn feasibility_examples() {
        let coin = make_coin(1.0, -1.0, 0.6).unwrap();
        assert!(is_feasible(&[0.0], &coin).unwrap());
        assert!(is_feasible(&[1.0], &coin).unwrap());
        assert!(!is_feasible(&[-0.1], &coin).unwrap());
        let two = independent(&[coin.clone(), coin.clone()]).unwrap();
        assert!(!is_feasible(&[0.7, 0.7], &two).unwrap());
        assert!(is_feasible(&[0.5, 0.5], &two).unwrap());
        assert!(matches!(
            is_feasible(&[0.1, 0.1], &coin),
            Err(Error::AllocationDimension { .. })
        ));
    }

    #[test]
    fn independent_product_probabilities() {
        let coin = make_coin(1.0, -1.0, 0.9).unwrap();
        let two = independent(&[coin.clone(), coin]).unwrap();
        let probs: Vec<f64> = two.atoms().iter().map(|a| a.p).collect();
        let expect = [0.81, 0.09, 0.09, 0.01];
        for (p, e) in probs.iter().zip(expect) {
            assert!((p - e).abs() < 1e-15);
        }
        assert_eq!(two.atoms()[1].x, vec![1.0, -1.0]);
    }

    #[test]
    fn single_atom_always_sampled() {
        let m = GambleModel::new(vec![Atom::new(vec![0.3], 1.0)]).unwrap();
        let mut rng = path_rng(1, 0);
        assert!((0..100).all(|_| m.sample_outcome(&mut rng) == [0.3]));
    }

    #[test]
    fn sample_frequency_matches_probability() {
        let m = make_coin(1.0, -1.0, 0.6).unwrap();
        let mut rng = path_rng(2024, 0);
        let n = 1_000_000;
        let wins = (0..n).filter(|_| m.sample_outcome(&mut rng)[0] > 0.0).count();
        let freq = wins as f64 / n as f64;
        let tol = 3.0 * (0.24f64 / n as f64).sqrt();
        assert!((freq - 0.6).abs() <= tol, "freq {freq}");
    }

    #[test]
    fn json_round_trip_and_errors() {
        let m = make_coin(0.15, -0.95, 0.95).unwrap();
        let back = GambleModel::from_json(&m.to_json(None)).unwrap();
        assert_eq!(back.atoms(), m.atoms());
        let text = r#"{"atoms": [{"x": [0.1], "p": 0.5}, {"x": [-2.0], "p": 0.5}]}"#;
        assert!(matches!(
            GambleModel::from_json(text),
            Err(Error::OutcomeBelowTotalLoss { atom: 1, .. })
        ));
        assert!(matches!(GambleModel::from_json("{"), Err(Error::ModelFile(_))));
    }

    fn arb_model(dim: usize) -> impl Strategy<Value = GambleModel> {
        prop::collection::vec(
            (prop::collection::vec(-1.0f64..2.0, dim), 0.01f64..1.0),
            1..6,
        )
        .prop_map(|raw| {
            let total: f64 = raw.iter().map(|(_, w)| w).sum();
            let mut atoms: Vec<Atom> =
                raw.into_iter().map(|(x, w)| Atom::new(x, w / total)).collect();
            let rest: f64 = atoms[1..].iter().map(|a| a.p).sum();
            atoms[0].p = 1.0 - rest;
            GambleModel::new(atoms).unwrap()
        })
    }

    proptest! {
        #[test]
        fn covariance_is_psd_and_consistent(m in (1usize..4).prop_flat_map(arb_model)) {
            let ms = m.moments();
            let n = m.dim();
            let outer = &ms.mean * ms.mean.transpose();
            for i in 0..n {
                for j in 0..n {
                    let lhs = ms.covariance[(i, j)];
                    prop_assert!((lhs - (ms.second_moment[(i, j)] - outer[(i, j)])).abs() < 1e-12);
                    prop_assert_eq!(ms.covariance[(i, j)], ms.covariance[(j, i)]);
                    prop_assert_eq!(ms.second_moment[(i, j)], ms.second_moment[(j, i)]);
                }
            }
            let eig = ms.covariance.clone().symmetric_eigen();
            prop_assert!(eig.eigenvalues.iter().all(|&e| e >= -PSD_SLACK));
        }

        #[test]
        fn zero_allocation_always_feasible(m in (1usize..4).prop_flat_map(arb_model)) {
            prop_assert!(is_feasible(&vec![0.0; m.dim()], &m).unwrap());
        }

        #[test]
        fn same_seed_same_outcomes(m in arb_model(2), seed in any::<u64>()) {
            let mut a = path_rng(seed, 0);
            let mut b = path_rng(seed, 0);
            for _ in 0..50 {
                let x = m.sample_outcome(&mut a).to_vec();
                let y = m.sample_outcome(&mut b).to_vec();
                prop_assert_eq!(x.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                                y.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
            }
        }
    }
}
