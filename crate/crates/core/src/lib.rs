//! Equilibrium engine for staking-pool formation games.
//!
//! Honest agents with heterogeneous pool-running costs choose between
//! running a staking pool and delegating to one; malicious agents always run
//! pools. The crate computes the unique threshold equilibrium for a given
//! owner reward share, designs the share for security or welfare, measures
//! the reward captured by malicious pools, handles costly delegation,
//! endogenous rewards and return competition, and checks the continuum
//! predictions against a finite-agent Monte Carlo simulator.

pub mod closed_form;
pub mod continuum;
pub mod discrete;
pub mod distributions;
pub mod error;
pub mod extensions;
pub mod numeric;
pub mod reward_design;
pub mod tables;

pub use continuum::{
    equilibrium_summary, lambda_from_cstar, security_max_cstar, solve_threshold_equilibrium,
    welfare, welfare_optimal_cstar, Corner, DesignKind, DesignResult, EquilibriumResult,
    GameParams,
};
pub use distributions::{CostDistribution, Family};
pub use error::{Error, Result};
