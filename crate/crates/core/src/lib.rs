//! Active Bayesian inverse reinforcement learning on tabular MDPs.
//!
//! The engine picks the initial state of the next expert demonstration by
//! maximising the expected information gain about the unknown reward
//! parameters. Modules:
//!
//! - [`mdp`]: gridworlds, exact planning, Boltzmann-rational policies and trajectories.
//! - [`bayes_irl`]: reward posteriors by adaptive Metropolis sampling, a grid oracle and
//!   k-nearest-neighbour entropy estimates.
//! - [`acquisition`]: nested Monte Carlo EIG, the UCB refinement, an exact EIG oracle and baselines.
//! - [`active_loop`]: the sequential experiment, apprentice policy, regret and seeded suites.
//! - [`scaling`]: timing harness over scaled-up structured worlds.

pub mod acquisition;
pub mod active_loop;
pub mod bayes_irl;
pub mod config;
pub mod error;
pub mod mdp;
pub mod reward;
pub mod rng;
pub mod scaling;

pub use error::{Error, Result};
