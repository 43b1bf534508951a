//! Log-optimal (Kelly) betting laboratory.
//!
//! The crate is organised around a finite-support [`GambleModel`] of the
//! per-period return vector `X`. On top of it sit:
//!
//! * [`growth`]: exact maximisation of `g(K) = E[log(1 + KᵀX)]` over the
//!   survival-feasible simplex, plus annualised-return conversion.
//! * [`approx`]: second-order (Taylor) and GBM-style closed-form fractions,
//!   their saturation / ray-projection repairs and the reward-inefficiency
//!   analysis of the Taylor fraction.
//! * [`drawdown`]: wealth paths, maximum and complementary drawdown,
//!   exact enumeration, Monte Carlo estimators, drawdown-constrained growth
//!   maximisation and level-set convexity probes.
//! * [`adaptive`]: sliding-window estimation of a coin's win probability
//!   driving a time-varying Kelly fraction.
//! * [`market`]: price-series ingestion into an empirical joint PMF.
//!
//! Monte Carlo work fans out over paths through [`par`]; with the
//! `parallel` feature (default) that uses rayon, otherwise it runs
//! sequentially. Results are identical either way.

pub mod adaptive;
pub mod approx;
pub mod config;
pub mod drawdown;
mod error;
pub mod gamble;
pub mod growth;
pub mod market;
pub mod par;

pub use error::{Error, Result};
pub use gamble::{Allocation, Atom, GambleModel, MomentSet};
pub use growth::GrowthResult;
pub use par::Execution;
