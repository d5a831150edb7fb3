//! Learnable GBM reward chain: actions pick the transition kernel, and the
//! reward is the wealth increment of one exact GBM step in the current state.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{EnvObservation, Environment};
use crate::dynamics::{analytic_growth_rate, sample_next, GbmChainSpec};
use crate::mdp::{stationary_distribution, DeterministicPolicy, StochasticMatrix};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GbmEnvSpec {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    #[serde(default = "unit")]
    pub dt: f64,
    /// One row-stochastic kernel per action.
    pub kernels: Vec<StochasticMatrix>,
    #[serde(default = "unit")]
    pub r0: f64,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
}

fn unit() -> f64 {
    1.0
}

fn default_horizon() -> usize {
    200
}

impl GbmEnvSpec {
    pub fn gbm(&self) -> GbmChainSpec {
        GbmChainSpec {
            mu: self.mu.clone(),
            sigma: self.sigma.clone(),
            dt: self.dt,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.gbm().validate()?;
        if self.kernels.is_empty() {
            return Err(Error::invalid("gbm_chain needs at least one kernel"));
        }
        if let Some(k) = self.kernels.iter().find(|k| k.n() != self.mu.len()) {
            return Err(Error::dim(format!(
                "kernel over {} states, spec has {}",
                k.n(),
                self.mu.len()
            )));
        }
        if !(self.r0 > 0.0) {
            return Err(Error::invalid("r0 must be positive"));
        }
        Ok(())
    }

    /// Chain induced by playing `policy(s)`'s kernel row in each state.
    pub fn induced_chain(&self, policy: &DeterministicPolicy) -> Result<StochasticMatrix> {
        let n = self.mu.len();
        if policy.n_states() != n || policy.actions().iter().any(|&a| a >= self.kernels.len()) {
            return Err(Error::dim("policy does not fit the gbm chain"));
        }
        let data = (0..n)
            .flat_map(|s| self.kernels[policy.action(s)].row(s).to_vec())
            .collect();
        StochasticMatrix::new(n, data)
    }

    /// Time-average growth rate of wealth under `policy`.
    pub fn policy_growth_rate(&self, policy: &DeterministicPolicy) -> Result<f64> {
        let dist = stationary_distribution(&self.induced_chain(policy)?)?;
        analytic_growth_rate(&self.gbm(), &dist)
    }
}

#[derive(Debug, Clone)]
pub struct GbmChainEnv {
    spec: GbmEnvSpec,
    gbm: GbmChainSpec,
    rng: ChaCha8Rng,
    state: usize,
    wealth: f64,
    t: usize,
}

impl GbmChainEnv {
    pub fn new(spec: GbmEnvSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            gbm: spec.gbm(),
            wealth: spec.r0,
            spec,
            rng: ChaCha8Rng::seed_from_u64(seed),
            state: 0,
            t: 0,
        })
    }
}

impl Environment for GbmChainEnv {
    fn n_states(&self) -> usize {
        self.spec.mu.len()
    }

    fn n_actions(&self) -> usize {
        self.spec.kernels.len()
    }

    fn reset(&mut self) -> usize {
        self.state = 0;
        self.wealth = self.spec.r0;
        self.t = 0;
        0
    }

    fn step(&mut self, action: usize) -> Result<EnvObservation> {
        let kernel = self
            .spec
            .kernels
            .get(action)
            .ok_or_else(|| Error::invalid(format!("gbm chain has no action {action}")))?;
        let z: f64 = self.rng.sample(StandardNormal);
        let next_wealth = self.wealth * self.gbm.log_increment(self.state, z).exp();
        let reward = next_wealth - self.wealth;
        self.wealth = next_wealth;
        self.state = sample_next(&mut self.rng, kernel.row(self.state));
        self.t += 1;
        Ok(EnvObservation {
            state: self.state,
            reward,
            terminated: self.t >= self.spec.horizon,
            truncated: self.t >= self.spec.horizon,
        })
    }

    fn wealth(&self) -> Option<f64> {
        Some(self.wealth)
    }

    fn set_horizon(&mut self, horizon: usize) {
        self.spec.horizon = horizon;
    }
}
