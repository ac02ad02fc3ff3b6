//! Scenario-based risk measures of the infimum-of-expectations form,
//! expected-return maximization under a risk bound via Lagrangian duality,
//! and the equivalent maxmin family of loss-aversion utilities.
//!
//! - [`scenario`]: finite discrete distributions (construction, CSV,
//!   deterministic Normal sampling).
//! - [`risk`]: the variance / cvar / wmd / oce kernels, a generic 1-D
//!   minimizer and closed-form oracles.
//! - [`axioms`]: seeded empirical checks of the coherence axioms with
//!   reproducible witnesses.
//! - [`utility`]: the utility family attached to a risk bound and the cvar
//!   loss-aversion factor.
//! - [`solver`]: the Lagrangian dual solver for linear scenario payoffs and
//!   its maxmin/saddle verification counterparts.
//! - [`gaussian`]: Normal quantile/CVaR utilities and the closed-form
//!   two-asset portfolio, including the reference-table reproduction.

pub mod axioms;
pub mod cli;
pub mod error;
pub mod gaussian;
pub mod risk;
pub mod rng;
pub mod scenario;
pub mod solver;
pub mod utility;

pub use error::{Error, Result};
