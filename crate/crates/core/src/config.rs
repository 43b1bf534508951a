//! Numerical tolerances and fixed budgets shared across the crate.

/// Allowed absolute deviation of the atom probabilities from summing to one.
pub const PROBABILITY_SUM_TOL: f64 = 1e-12;

/// Slack below zero tolerated for covariance eigenvalues (PSD check).
pub const PSD_SLACK: f64 = 1e-10;

/// Slack on the `K ≥ 0`, `ΣK ≤ 1` and `Kᵀx ≥ -1` feasibility tests.
pub const FEASIBILITY_SLACK: f64 = 1e-12;

/// Trial points whose smallest wealth factor `1 + Kᵀx` is below this are
/// treated as touching the survival boundary by the optimiser.
pub const SURVIVAL_MARGIN: f64 = 1e-12;

/// Iteration budget of the projected gradient ascent.
pub const MAX_ASCENT_ITERATIONS: usize = 100_000;

/// Consecutive iterations the relative objective change must stay below
/// the tolerance before the ascent is declared converged.
pub const STABLE_ITERATIONS: usize = 5;

/// Reciprocal condition number below which a moment matrix is singular.
pub const SINGULAR_RCOND: f64 = 1e-12;

/// Maximum number of outcome sequences exact enumeration will visit.
pub const ENUMERATION_BUDGET: u64 = 1_000_000;

/// Minimum path count accepted by the Monte Carlo estimators.
pub const MIN_PATHS: usize = 100;

/// Width, in standard errors, of the conservative Monte Carlo band.
pub const CONFIDENCE_SIGMAS: f64 = 3.0;

/// Days per year used for the default betting interval.
pub const TRADING_DAYS_PER_YEAR: f64 = 252.0;
