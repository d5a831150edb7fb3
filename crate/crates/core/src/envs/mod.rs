//! Seeded, resettable environments with a uniform step interface.

mod cartpole;
mod coin_toss;
mod gbm_chain;

pub use cartpole::{cartpole_step, discretize, CartPole, CartPoleSpec, CartPoleState};
pub use coin_toss::{coin_toss_step, kelly_optimal_fraction, log_growth_per_step, CoinToss, CoinTossSpec};
pub use gbm_chain::{GbmChainEnv, GbmEnvSpec};

use serde::{Deserialize, Serialize};

use crate::Result;

/// What the learner sees after one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvObservation {
    pub state: usize,
    pub reward: f64,
    /// The episode is over, either by failure or by the time limit.
    pub terminated: bool,
    /// The episode ended only because of the time limit; the next state
    /// still has a meaningful continuation value.
    pub truncated: bool,
}

/// A finite-state, finite-action episodic environment.
pub trait Environment {
    fn n_states(&self) -> usize;

    fn n_actions(&self) -> usize;

    /// Starts a new episode and returns its initial state.
    fn reset(&mut self) -> usize;

    fn step(&mut self, action: usize) -> Result<EnvObservation>;

    /// Current cumulative wealth, for environments that track one.
    fn wealth(&self) -> Option<f64> {
        None
    }

    /// Caps the number of steps per episode.
    fn set_horizon(&mut self, horizon: usize);
}

impl<E: Environment + ?Sized> Environment for Box<E> {
    fn n_states(&self) -> usize {
        (**self).n_states()
    }

    fn n_actions(&self) -> usize {
        (**self).n_actions()
    }

    fn reset(&mut self) -> usize {
        (**self).reset()
    }

    fn step(&mut self, action: usize) -> Result<EnvObservation> {
        (**self).step(action)
    }

    fn wealth(&self) -> Option<f64> {
        (**self).wealth()
    }

    fn set_horizon(&mut self, horizon: usize) {
        (**self).set_horizon(horizon)
    }
}

/// Environment section of an experiment config, tagged by `type`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvSpec {
    CoinToss(CoinTossSpec),
    GbmChain(GbmEnvSpec),
    Cartpole(CartPoleSpec),
}

impl EnvSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            EnvSpec::CoinToss(spec) => spec.validate(),
            EnvSpec::GbmChain(spec) => spec.validate(),
            EnvSpec::Cartpole(spec) => spec.validate(),
        }
    }

    pub fn build(&self, seed: u64) -> Result<Box<dyn Environment + Send>> {
        Ok(match self {
            EnvSpec::CoinToss(spec) => Box::new(CoinToss::new(spec.clone(), seed)?),
            EnvSpec::GbmChain(spec) => Box::new(GbmChainEnv::new(spec.clone(), seed)?),
            EnvSpec::Cartpole(spec) => Box::new(CartPole::new(spec.clone(), seed)?),
        })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            EnvSpec::CoinToss(_) => "coin_toss",
            EnvSpec::GbmChain(_) => "gbm_chain",
            EnvSpec::Cartpole(_) => "cartpole",
        }
    }

    /// Initial wealth for wealth-tracking environments.
    pub fn initial_wealth(&self) -> Option<f64> {
        match self {
            EnvSpec::CoinToss(spec) => Some(spec.r0),
            EnvSpec::GbmChain(spec) => Some(spec.r0),
            EnvSpec::Cartpole(_) => None,
        }
    }
}
