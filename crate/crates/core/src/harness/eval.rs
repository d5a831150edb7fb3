//! Greedy-policy evaluation and its summary statistics.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::envs::Environment;
use crate::mdp::DeterministicPolicy;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub cumulative_rewards: Vec<f64>,
    pub steps: Vec<usize>,
    pub median: f64,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Per-episode terminal wealth, for wealth-tracking environments.
    pub terminal_wealth: Option<Vec<f64>>,
    pub median_terminal_wealth: Option<f64>,
    /// Mean over episodes of `ln(W_T / W_0) / T`.
    pub growth_rate: Option<f64>,
}

/// Median with the midpoint convention for even lengths.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty sample");
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    }
}

impl EvalSummary {
    fn from_episodes(rewards: Vec<f64>, steps: Vec<usize>, wealth: Option<(f64, Vec<f64>)>) -> Self {
        let n = rewards.len() as f64;
        let growth_rate = wealth.as_ref().and_then(|(w0, ws)| {
            let rates: Option<Vec<f64>> = ws
                .iter()
                .zip(&steps)
                .map(|(&w, &t)| (w > 0.0 && t > 0).then(|| (w / w0).ln() / t as f64))
                .collect();
            rates.map(|r| r.iter().sum::<f64>() / r.len() as f64)
        });
        let terminal_wealth = wealth.map(|(_, ws)| ws);
        Self {
            median: median(&rewards),
            mean: rewards.iter().sum::<f64>() / n,
            min: rewards.iter().copied().fold(f64::INFINITY, f64::min),
            max: rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            median_terminal_wealth: terminal_wealth.as_deref().map(median),
            terminal_wealth,
            growth_rate,
            cumulative_rewards: rewards,
            steps,
        }
    }

    /// CSV with header `episode,cumulative_reward,terminal_wealth,steps`;
    /// the wealth column is empty where wealth is undefined.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("episode,cumulative_reward,terminal_wealth,steps\n");
        for (i, (r, t)) in self.cumulative_rewards.iter().zip(&self.steps).enumerate() {
            let wealth = self
                .terminal_wealth
                .as_ref()
                .map(|w| w[i].to_string())
                .unwrap_or_default();
            let _ = writeln!(out, "{i},{r},{wealth},{t}");
        }
        out
    }
}

/// Runs `policy` greedily for `n_episodes` episodes of at most `horizon`
/// steps each.
pub fn evaluate_policy<E: Environment + ?Sized>(
    env: &mut E,
    policy: &DeterministicPolicy,
    n_episodes: usize,
    horizon: usize,
) -> Result<EvalSummary> {
    if n_episodes == 0 {
        return Err(Error::invalid("need at least one evaluation episode"));
    }
    if policy.n_states() != env.n_states() || policy.actions().iter().any(|&a| a >= env.n_actions()) {
        return Err(Error::dim(format!(
            "policy over {} states does not fit an environment with {} states and {} actions",
            policy.n_states(),
            env.n_states(),
            env.n_actions()
        )));
    }
    env.set_horizon(horizon);
    let mut rewards = Vec::with_capacity(n_episodes);
    let mut steps = Vec::with_capacity(n_episodes);
    let mut initial_wealth = None;
    let mut wealth = Vec::new();
    for _ in 0..n_episodes {
        let mut state = env.reset();
        if initial_wealth.is_none() {
            initial_wealth = env.wealth();
        }
        let mut total = 0.0;
        let mut t = 0;
        while t < horizon {
            let obs = env.step(policy.action(state))?;
            total += obs.reward;
            t += 1;
            state = obs.state;
            if obs.terminated {
                break;
            }
        }
        rewards.push(total);
        steps.push(t);
        if let Some(w) = env.wealth() {
            wealth.push(w);
        }
    }
    Ok(EvalSummary::from_episodes(rewards, steps, initial_wealth.map(|w0| (w0, wealth))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{CartPole, CartPoleSpec, CoinToss, CoinTossSpec};

    #[test]
    fn median_conventions() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn zero_horizon_gives_zero_rewards() {
        let mut env = CartPole::new(CartPoleSpec::default(), 0).unwrap();
        let policy = DeterministicPolicy::constant(env.n_states(), 1);
        let s = evaluate_policy(&mut env, &policy, 10, 0).unwrap();
        assert!(s.cumulative_rewards.iter().all(|&r| r == 0.0));
        assert_eq!(s.steps, vec![0; 10]);
    }

    #[test]
    fn no_exposure_keeps_initial_wealth() {
        let mut env = CoinToss::new(CoinTossSpec::default(), 3).unwrap();
        let s = evaluate_policy(&mut env, &DeterministicPolicy::constant(1, 0), 100, 1000).unwrap();
        assert!(s.terminal_wealth.unwrap().iter().all(|&w| w == 100.0));
        assert_eq!(s.growth_rate, Some(0.0));
    }

    #[test]
    fn full_bet_median_wealth_collapses() {
        let mut env = CoinToss::new(CoinTossSpec::default(), 5).unwrap();
        let s = evaluate_policy(&mut env, &DeterministicPolicy::constant(1, 4), 100, 1000).unwrap();
        assert!(s.median_terminal_wealth.unwrap() < 100.0);
        assert_eq!(s.cumulative_rewards.len(), 100);
        assert!(s.growth_rate.unwrap() < 0.0);
        let csv = s.to_csv();
        assert!(csv.starts_with("episode,cumulative_reward,terminal_wealth,steps\n"));
        assert_eq!(csv.lines().count(), 101);
    }

    #[test]
    fn mismatched_policy_is_rejected() {
        let mut env = CoinToss::new(CoinTossSpec::default(), 5).unwrap();
        assert!(evaluate_policy(&mut env, &DeterministicPolicy::constant(2, 0), 1, 10).is_err());
    }
}
