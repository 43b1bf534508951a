//! Wealth paths and drawdown analysis.

pub mod constrained;
pub mod exact;
pub mod monte_carlo;
pub mod path;
pub mod probe;

pub use constrained::{
    expected_log_complementary, maximize_growth_constrained, ConstrainedConfig, ConstrainedMethod,
    ConstrainedResult, ConstraintKind, ConstraintSpec, Evaluation, LogComplementary,
};
pub use exact::{exact_probability, exact_summary, expected_drawdown_exact, ExactSummary};
pub use monte_carlo::{
    drawdown_probability_mc, expected_drawdown_mc, expected_log_complementary_mc, sample_drawdowns,
    Estimate, MonteCarloConfig, Scenarios,
};
pub use path::{
    coin_drawdown_probability, drawdown_of_values, max_drawdown, simulate_path, DrawdownStats,
    DrawdownTracker, WealthPath,
};
pub use probe::{convexity_probe, simplex_grid, GridPoint, MidpointCheck, ProbeReport};
