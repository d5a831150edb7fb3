//! Time-average growth rate regularization for multi-step Q-learning.
//!
//! The crate is organised bottom-up:
//!
//! * [`mdp`]: finite MDPs, deterministic policies, stationary distributions
//!   and exact (regularized) policy evaluation.
//! * [`dynamics`]: per-state geometric Brownian motion over a Markov chain,
//!   closed-form and simulated time-average growth rates.
//! * [`estimators`]: the sliding window, discounted N-step return and the
//!   modified geometric mean (MGM).
//! * [`operators`]: standard and growth-regularized N-step Bellman
//!   optimality operators, fixed points and contraction diagnostics.
//! * [`learner`]: regularized multi-step Q-learning driven by the MGM, plus
//!   an independent multi-step Q-learning baseline.
//! * [`envs`]: coin-toss betting, GBM reward chain and discretized Cart-Pole.
//! * [`harness`]: JSON experiment configs, training/evaluation/sweep runs,
//!   artifact emission and the randomized verification suites.

pub mod dynamics;
pub mod envs;
mod error;
pub mod estimators;
pub mod harness;
pub mod learner;
pub mod mdp;
pub mod operators;

pub use error::{Error, Result};

/// Version string recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
