//! Multiplicative coin-toss betting.
//!
//! Each step the agent stakes a fraction `f` of its wealth `W` on a fair
//! coin and receives `f * up * W` on heads or `f * down * W` on tails. With
//! the defaults (+0.5 / -0.4) the expected wealth grows by 5% per step at
//! `f = 1` while the typical trajectory shrinks, since
//! `0.5 ln(1.5) + 0.5 ln(0.6) < 0`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{EnvObservation, Environment};
use crate::{Error, Result};

const LOG_WEALTH_BUCKETS: usize = 17;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoinTossSpec {
    pub up_factor: f64,
    pub down_factor: f64,
    /// Bet fractions, one per action, ascending within `[0, 1]`.
    pub fractions: Vec<f64>,
    pub r0: f64,
    pub horizon: usize,
    /// Expose `ln(W / r0)` in 17 unit-width buckets instead of a single
    /// dummy state.
    pub observe_wealth: bool,
}

impl Default for CoinTossSpec {
    fn default() -> Self {
        Self {
            up_factor: 0.5,
            down_factor: -0.4,
            fractions: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            r0: 100.0,
            horizon: 200,
            observe_wealth: false,
        }
    }
}

impl CoinTossSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.up_factor > 0.0 && self.down_factor < 0.0 && self.down_factor > -1.0) {
            return Err(Error::invalid("coin toss needs up_factor > 0 > down_factor > -1"));
        }
        if self.fractions.is_empty()
            || self.fractions.iter().any(|f| !(0.0..=1.0).contains(f))
            || self.fractions.windows(2).any(|w| w[0] > w[1])
        {
            return Err(Error::invalid("fractions must be sorted ascending within [0,1]"));
        }
        if !(self.r0 > 0.0 && self.r0.is_finite()) {
            return Err(Error::invalid("r0 must be positive"));
        }
        Ok(())
    }

    /// Index of `fraction` in the action set, if present.
    pub fn action_of(&self, fraction: f64) -> Option<usize> {
        self.fractions.iter().position(|&f| f == fraction)
    }
}

/// One bet: returns `(new_wealth, reward)` with `reward = f * c * wealth`.
pub fn coin_toss_step(spec: &CoinTossSpec, wealth: f64, fraction: f64, heads: bool) -> (f64, f64) {
    let factor = if heads { spec.up_factor } else { spec.down_factor };
    let reward = fraction * factor * wealth;
    (wealth + reward, reward)
}

/// Expected per-step log growth `0.5 ln(1 + up f) + 0.5 ln(1 + down f)`.
pub fn log_growth_per_step(spec: &CoinTossSpec, fraction: f64) -> f64 {
    0.5 * (1.0 + spec.up_factor * fraction).ln() + 0.5 * (1.0 + spec.down_factor * fraction).ln()
}

/// Fraction in `[0, 1]` maximising expected log growth, by grid search at
/// resolution 1e-6.
pub fn kelly_optimal_fraction(spec: &CoinTossSpec) -> f64 {
    const STEPS: u32 = 1_000_000;
    let mut best = 0.0;
    let mut best_value = f64::NEG_INFINITY;
    for k in 0..=STEPS {
        let f = f64::from(k) / f64::from(STEPS);
        let value = log_growth_per_step(spec, f);
        if value > best_value {
            best = f;
            best_value = value;
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct CoinToss {
    spec: CoinTossSpec,
    rng: ChaCha8Rng,
    wealth: f64,
    t: usize,
}

impl CoinToss {
    pub fn new(spec: CoinTossSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            wealth: spec.r0,
            spec,
            rng: ChaCha8Rng::seed_from_u64(seed),
            t: 0,
        })
    }

    pub fn spec(&self) -> &CoinTossSpec {
        &self.spec
    }

    fn observe(&self) -> usize {
        if !self.spec.observe_wealth {
            return 0;
        }
        let half = (LOG_WEALTH_BUCKETS / 2) as f64;
        let x = (self.wealth / self.spec.r0).ln().clamp(-half, half);
        ((x + half + 0.5).floor() as usize).min(LOG_WEALTH_BUCKETS - 1)
    }
}

impl Environment for CoinToss {
    fn n_states(&self) -> usize {
        if self.spec.observe_wealth {
            LOG_WEALTH_BUCKETS
        } else {
            1
        }
    }

    fn n_actions(&self) -> usize {
        self.spec.fractions.len()
    }

    fn reset(&mut self) -> usize {
        self.wealth = self.spec.r0;
        self.t = 0;
        self.observe()
    }

    fn step(&mut self, action: usize) -> Result<EnvObservation> {
        let fraction = *self
            .spec
            .fractions
            .get(action)
            .ok_or_else(|| Error::invalid(format!("coin toss has no action {action}")))?;
        let heads = self.rng.random::<bool>();
        let (wealth, reward) = coin_toss_step(&self.spec, self.wealth, fraction, heads);
        self.wealth = wealth;
        self.t += 1;
        Ok(EnvObservation {
            state: self.observe(),
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

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_examples() {
        let spec = CoinTossSpec::default();
        assert_eq!(coin_toss_step(&spec, 100.0, 1.0, true), (150.0, 50.0));
        assert_eq!(coin_toss_step(&spec, 100.0, 0.0, true).1, 0.0);
        assert_eq!(coin_toss_step(&spec, 100.0, 0.0, false).1, 0.0);
        let (w, r) = coin_toss_step(&spec, 100.0, 0.25, false);
        assert!((r + 10.0).abs() < 1e-12 && (w - 90.0).abs() < 1e-12);
    }

    #[test]
    fn kelly_fractions() {
        assert!((kelly_optimal_fraction(&CoinTossSpec::default()) - 0.25).abs() < 1e-6);
        let symmetric = CoinTossSpec {
            down_factor: -0.5,
            ..CoinTossSpec::default()
        };
        assert_eq!(kelly_optimal_fraction(&symmetric), 0.0);
        let two_to_one = CoinTossSpec {
            up_factor: 1.0,
            down_factor: -0.5,
            ..CoinTossSpec::default()
        };
        assert!((kelly_optimal_fraction(&two_to_one) - 0.5).abs() < 1e-6);
    }

    #[test]
    fn log_growth_gap() {
        let spec = CoinTossSpec::default();
        assert!((log_growth_per_step(&spec, 1.0) - 0.5 * 0.9f64.ln()).abs() < 1e-15);
        assert!((log_growth_per_step(&spec, 1.0) + 0.052_680_257).abs() < 1e-8);
        assert!((log_growth_per_step(&spec, 0.25) - 0.006_211_260).abs() < 1e-8);
    }

    #[test]
    fn wealth_stays_positive_and_episode_ends() {
        let mut env = CoinToss::new(
            CoinTossSpec {
                horizon: 5000,
                ..CoinTossSpec::default()
            },
            3,
        )
        .unwrap();
        env.reset();
        let mut steps = 0;
        loop {
            let obs = env.step(4).unwrap();
            steps += 1;
            assert!(env.wealth().unwrap() > 0.0);
            if obs.terminated {
                break;
            }
        }
        assert_eq!(steps, 5000);
        assert!(env.step(9).is_err());
    }

    #[test]
    fn wealth_buckets() {
        let mut env = CoinToss::new(
            CoinTossSpec {
                observe_wealth: true,
                ..CoinTossSpec::default()
            },
            1,
        )
        .unwrap();
        assert_eq!(env.n_states(), 17);
        assert_eq!(env.reset(), 8);
        for _ in 0..150 {
            let obs = env.step(4).unwrap();
            assert!(obs.state < 17);
        }
    }

    #[test]
    fn validation() {
        let bad = CoinTossSpec {
            down_factor: -1.0,
            ..CoinTossSpec::default()
        };
        assert!(bad.validate().is_err());
        let unsorted = CoinTossSpec {
            fractions: vec![0.5, 0.25],
            ..CoinTossSpec::default()
        };
        assert!(unsorted.validate().is_err());
    }
}
