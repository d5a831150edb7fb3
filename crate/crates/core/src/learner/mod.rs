//! Regularized multi-step Q-learning with the MGM growth estimator.
//!
//! Every emitted window `(s_0, a_0, r_0) .. (s_{N-1}, a_{N-1}, r_{N-1}), s_N`
//! updates only `q(s_0, a_0)`:
//!
//! ```text
//! Delta   = (1 - lambda) * delta_N + lambda * (1 - gamma^N) * G_hat
//! q(s0,a0) <- (1 - alpha) q(s0,a0) + alpha (Delta + gamma^N max_a' q(s_N, a'))
//! ```
//!
//! where `delta_N` is the discounted window return and `G_hat` the MGM of the
//! undiscounted window sum. With `lambda = 0` and overlapping windows this is
//! plain multi-step Q-learning; [`baseline`] holds an independent
//! implementation of that special case.

pub mod baseline;

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::envs::Environment;
use crate::estimators::{mgm, n_step_return, window_sum, Transition, WindowBuffer, WindowMode};
use crate::mdp::{DeterministicPolicy, QTable};
use crate::{Error, Result};

/// RNG stream used for exploration; environments use stream 0 of the same seed.
pub const AGENT_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    pub lambda: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub n_steps: usize,
    pub mode_e: WindowMode,
    pub total_steps: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay_steps: usize,
    pub seed: u64,
    /// Use `max(alpha, 1 / visits(s0, a0))` as the step size.
    pub visit_count_alpha: bool,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            gamma: 0.99,
            alpha: 0.1,
            n_steps: 5,
            mode_e: WindowMode::Overlapping,
            total_steps: 10_000,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_steps: 10_000,
            seed: 0,
            visit_count_alpha: false,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |x: f64| (0.0..=1.0).contains(&x);
        if !in_unit(self.lambda) {
            return Err(Error::invalid(format!("lambda must lie in [0,1], got {}", self.lambda)));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::invalid(format!("gamma must lie in (0,1), got {}", self.gamma)));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::invalid(format!("alpha must lie in (0,1], got {}", self.alpha)));
        }
        if self.n_steps == 0 {
            return Err(Error::invalid("n_steps must be at least 1"));
        }
        if self.total_steps == 0 {
            return Err(Error::invalid("total_steps must be positive"));
        }
        if !in_unit(self.epsilon_start) || !in_unit(self.epsilon_end) || self.epsilon_start < self.epsilon_end {
            return Err(Error::invalid("need 1 >= epsilon_start >= epsilon_end >= 0"));
        }
        if self.epsilon_decay_steps == 0 {
            return Err(Error::invalid("epsilon_decay_steps must be positive"));
        }
        Ok(())
    }

    /// Linearly decayed exploration rate at interaction `step`.
    pub fn epsilon(&self, step: usize) -> f64 {
        if step >= self.epsilon_decay_steps {
            return self.epsilon_end;
        }
        let progress = step as f64 / self.epsilon_decay_steps as f64;
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * progress
    }
}

/// Quantities computed for one window update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowUpdate {
    pub state: usize,
    pub action: usize,
    pub delta_n: f64,
    pub mgm: f64,
    /// `Delta + gamma^N max_a' q(s_N, a') - q(s0, a0)` before the update.
    pub td_error: f64,
    /// `q(s0, a0)` after the update.
    pub new_value: f64,
}

/// Applies one windowed update with step size `cfg.alpha`.
pub fn algorithm1_update(q: &mut QTable, window: &[Transition], cfg: &LearnerConfig) -> Result<WindowUpdate> {
    apply_update(q, window, cfg, cfg.alpha)
}

fn apply_update(q: &mut QTable, window: &[Transition], cfg: &LearnerConfig, alpha: f64) -> Result<WindowUpdate> {
    let n = cfg.n_steps;
    if window.len() != n {
        return Err(Error::dim(format!("window holds {} transitions, expected {n}", window.len())));
    }
    let rewards: Vec<f64> = window.iter().map(|t| t.reward).collect();
    let delta_n = n_step_return(&rewards, cfg.gamma)?;
    let g_hat = mgm(window_sum(&rewards, n)?, n);
    let gamma_n = cfg.gamma.powi(n as i32);
    let blended = (1.0 - cfg.lambda) * delta_n + cfg.lambda * (1.0 - gamma_n) * g_hat;

    let first = window[0];
    let last = window[n - 1];
    let bootstrap = if last.terminal { 0.0 } else { q.max_value(last.next_state) };
    let target = blended + gamma_n * bootstrap;
    let old = q.get(first.state, first.action);
    let new_value = (1.0 - alpha) * old + alpha * target;
    q.set(first.state, first.action, new_value);

    Ok(WindowUpdate {
        state: first.state,
        action: first.action,
        delta_n,
        mgm: g_hat,
        td_error: target - old,
        new_value,
    })
}

/// Per-state argmax with ties to the smallest action index.
pub fn greedy_policy(q: &QTable) -> DeterministicPolicy {
    DeterministicPolicy::new((0..q.n_states()).map(|s| q.argmax(s)).collect(), q.n_actions())
        .expect("argmax stays within the action range")
}

/// One row of the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowLog {
    /// Interaction step (0-based) at which the window completed.
    pub step: usize,
    pub update: WindowUpdate,
    pub epsilon: f64,
    /// Number of updates applied before the window's first and last
    /// transitions were generated.
    pub first_policy_version: usize,
    pub last_policy_version: usize,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub final_q: QTable,
    pub final_policy: DeterministicPolicy,
    pub per_window_log: Vec<WindowLog>,
    pub episodes: usize,
}

impl TrainReport {
    /// CSV with header `step,s0,a0,delta_n,mgm,td_error,epsilon`.
    pub fn log_csv(&self) -> String {
        let mut out = String::from("step,s0,a0,delta_n,mgm,td_error,epsilon\n");
        for row in &self.per_window_log {
            let u = &row.update;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                row.step, u.state, u.action, u.delta_n, u.mgm, u.td_error, row.epsilon
            );
        }
        out
    }
}

/// Epsilon-greedy choice; always consumes one uniform draw, plus one action
/// draw when exploring.
pub(crate) fn epsilon_greedy<R: Rng + ?Sized>(rng: &mut R, q: &QTable, state: usize, epsilon: f64) -> usize {
    if rng.random::<f64>() < epsilon {
        rng.random_range(0..q.n_actions())
    } else {
        q.argmax(state)
    }
}

pub(crate) fn agent_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(AGENT_STREAM);
    rng
}

pub(crate) fn check_env<E: Environment + ?Sized>(env: &E, q: &QTable) -> Result<()> {
    if env.n_states() != q.n_states() || env.n_actions() != q.n_actions() {
        return Err(Error::dim(format!(
            "environment is {}x{}, q-table is {}x{}",
            env.n_states(),
            env.n_actions(),
            q.n_states(),
            q.n_actions()
        )));
    }
    Ok(())
}

/// Runs `cfg.total_steps` interactions of regularized multi-step Q-learning.
///
/// The window buffer is cleared whenever an episode ends, so no window spans
/// a reset.
pub fn train<E: Environment + ?Sized>(env: &mut E, cfg: &LearnerConfig, q0: QTable) -> Result<TrainReport> {
    cfg.validate()?;
    check_env(env, &q0)?;

    let mut rng = agent_rng(cfg.seed);
    let mut q = q0;
    let mut buffer = WindowBuffer::new(cfg.n_steps, cfg.mode_e)?;
    let mut visits = vec![0u64; q.n_states() * q.n_actions()];
    let mut log = Vec::new();
    let mut versions = std::collections::VecDeque::with_capacity(cfg.n_steps);
    let mut version = 0usize;
    let mut episodes = 1;
    let mut state = env.reset();

    for step in 0..cfg.total_steps {
        let epsilon = cfg.epsilon(step);
        let action = epsilon_greedy(&mut rng, &q, state, epsilon);
        let obs = env.step(action)?;
        let transition = Transition {
            state,
            action,
            reward: obs.reward,
            next_state: obs.state,
            terminal: obs.terminated && !obs.truncated,
        };
        versions.push_back(version);

        if let Some(window) = buffer.push(transition) {
            let first = window[0];
            let slot = first.state * q.n_actions() + first.action;
            visits[slot] += 1;
            let alpha = if cfg.visit_count_alpha {
                cfg.alpha.max(1.0 / visits[slot] as f64)
            } else {
                cfg.alpha
            };
            let update = apply_update(&mut q, &window, cfg, alpha)?;
            if !update.new_value.is_finite() {
                return Err(Error::invalid(format!("q({}, {}) became non-finite", first.state, first.action)));
            }
            log.push(WindowLog {
                step,
                update,
                epsilon,
                first_policy_version: versions[0],
                last_policy_version: *versions.back().expect("window is nonempty"),
            });
            match cfg.mode_e {
                WindowMode::Overlapping => {
                    versions.pop_front();
                }
                WindowMode::Disjoint => versions.clear(),
            }
            version += 1;
        }

        if obs.terminated {
            buffer.clear();
            versions.clear();
            state = env.reset();
            episodes += 1;
        } else {
            state = obs.state;
        }
    }

    Ok(TrainReport {
        final_policy: greedy_policy(&q),
        final_q: q,
        per_window_log: log,
        episodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{CoinToss, CoinTossSpec};

    fn window(rewards: &[f64]) -> Vec<Transition> {
        rewards
            .iter()
            .enumerate()
            .map(|(i, &r)| Transition {
                state: 0,
                action: 0,
                reward: r,
                next_state: if i + 1 == rewards.len() { 1 } else { 0 },
                terminal: false,
            })
            .collect()
    }

    fn cfg(lambda: f64, n: usize, gamma: f64, alpha: f64) -> LearnerConfig {
        LearnerConfig {
            lambda,
            n_steps: n,
            gamma,
            alpha,
            ..LearnerConfig::default()
        }
    }

    #[test]
    fn one_step_plain_q_learning() {
        let mut q = QTable::from_vec(2, 2, vec![0.5, 0.0, 2.0, 3.0]).unwrap();
        let c = cfg(0.0, 1, 0.9, 0.2);
        let u = algorithm1_update(&mut q, &window(&[1.5]), &c).unwrap();
        let expected = 0.5 + 0.2 * (1.5 + 0.9 * 3.0 - 0.5);
        assert!((q.get(0, 0) - expected).abs() < 1e-12);
        assert!((u.td_error - (1.5 + 0.9 * 3.0 - 0.5)).abs() < 1e-12);
        assert_eq!(q.get(1, 1), 3.0);
    }

    #[test]
    fn lambda_one_single_step_uses_reward_as_growth() {
        let mut q = QTable::from_vec(2, 1, vec![0.0, 4.0]).unwrap();
        let c = cfg(1.0, 1, 0.9, 1.0);
        let u = algorithm1_update(&mut q, &window(&[-2.0]), &c).unwrap();
        assert_eq!(u.mgm, -2.0);
        assert!((q.get(0, 0) - (0.1 * -2.0 + 0.9 * 4.0)).abs() < 1e-12);
    }

    #[test]
    fn two_step_regularized_example() {
        let alpha = 0.3;
        let mut q = QTable::zeros(2, 1);
        let c = cfg(0.5, 2, 0.9, alpha);
        algorithm1_update(&mut q, &window(&[1.0, 2.0]), &c).unwrap();
        // 0.5 (1 + 0.9 * 2) + 0.5 (1 - 0.81) sqrt(3)
        let delta = 0.5 * 2.8 + 0.5 * 0.19 * 3f64.sqrt();
        assert!((q.get(0, 0) - alpha * delta).abs() < 1e-12);
        assert!((delta - 1.5645).abs() < 1e-4);
    }

    #[test]
    fn terminal_window_does_not_bootstrap() {
        let mut q = QTable::from_vec(2, 1, vec![0.0, 100.0]).unwrap();
        let mut w = window(&[1.0]);
        w[0].terminal = true;
        algorithm1_update(&mut q, &w, &cfg(0.0, 1, 0.9, 1.0)).unwrap();
        assert_eq!(q.get(0, 0), 1.0);
    }

    #[test]
    fn target_is_affine_in_lambda() {
        let q = QTable::from_vec(2, 2, vec![0.3, -0.2, 1.1, 0.4]).unwrap();
        let w = window(&[0.7, -1.3, 2.2]);
        let target = |lambda: f64| {
            let mut q = q.clone();
            algorithm1_update(&mut q, &w, &cfg(lambda, 3, 0.95, 1.0)).unwrap().new_value
        };
        let (a, b, c) = (target(0.0), target(0.5), target(1.0));
        assert!((b - 0.5 * (a + c)).abs() < 1e-12);
    }

    #[test]
    fn wrong_window_length_is_rejected() {
        let mut q = QTable::zeros(2, 1);
        assert!(algorithm1_update(&mut q, &window(&[1.0]), &cfg(0.0, 2, 0.9, 0.5)).is_err());
    }

    #[test]
    fn greedy_policy_conventions() {
        let flat = QTable::zeros(3, 4);
        assert_eq!(greedy_policy(&flat).actions(), &[0, 0, 0]);
        let q = QTable::from_vec(2, 3, vec![0.1, 0.9, 0.2, -1.0, -3.0, -0.5]).unwrap();
        assert_eq!(greedy_policy(&q).actions(), &[1, 2]);
        assert_eq!(greedy_policy(&q.map(|v| 7.5 * v)), greedy_policy(&q));
    }

    #[test]
    fn fewer_steps_than_window_leaves_q_untouched() {
        let mut env = CoinToss::new(CoinTossSpec::default(), 0).unwrap();
        let q0 = QTable::filled(1, 5, 0.25);
        let c = LearnerConfig {
            total_steps: 4,
            ..LearnerConfig::default()
        };
        let report = train(&mut env, &c, q0.clone()).unwrap();
        assert!(report.per_window_log.is_empty());
        assert_eq!(report.final_q, q0);
    }

    #[test]
    fn log_length_follows_window_law() {
        for (mode, expected) in [(WindowMode::Overlapping, 96), (WindowMode::Disjoint, 20)] {
            let mut env = CoinToss::new(CoinTossSpec::default(), 1).unwrap();
            let c = LearnerConfig {
                total_steps: 100,
                mode_e: mode,
                ..LearnerConfig::default()
            };
            let report = train(&mut env, &c, QTable::zeros(1, 5)).unwrap();
            assert_eq!(report.per_window_log.len(), expected);
            assert_eq!(report.log_csv().lines().count(), expected + 1);
        }
    }

    #[test]
    fn disjoint_windows_are_single_policy() {
        let mut env = CoinToss::new(CoinTossSpec { horizon: 37, ..CoinTossSpec::default() }, 2).unwrap();
        let c = LearnerConfig {
            total_steps: 2_000,
            mode_e: WindowMode::Disjoint,
            lambda: 0.5,
            ..LearnerConfig::default()
        };
        let report = train(&mut env, &c, QTable::zeros(1, 5)).unwrap();
        assert!(!report.per_window_log.is_empty());
        for row in &report.per_window_log {
            assert_eq!(row.first_policy_version, row.last_policy_version);
        }
    }

    #[test]
    fn config_validation() {
        assert!(LearnerConfig::default().validate().is_ok());
        for bad in [
            LearnerConfig { lambda: 1.5, ..LearnerConfig::default() },
            LearnerConfig { gamma: 1.0, ..LearnerConfig::default() },
            LearnerConfig { alpha: 0.0, ..LearnerConfig::default() },
            LearnerConfig { n_steps: 0, ..LearnerConfig::default() },
            LearnerConfig { epsilon_start: 0.1, epsilon_end: 0.2, ..LearnerConfig::default() },
        ] {
            assert!(bad.validate().is_err());
        }
        let c = LearnerConfig { epsilon_decay_steps: 100, ..LearnerConfig::default() };
        assert_eq!(c.epsilon(0), 1.0);
        assert!((c.epsilon(50) - 0.525).abs() < 1e-12);
        assert_eq!(c.epsilon(1000), 0.05);
    }

    proptest::proptest! {
        #[test]
        fn q_stays_within_fixed_point_bound(
            lambda in 0.0f64..=1.0,
            n in 1usize..7,
            disjoint in proptest::bool::ANY,
            gamma in 0.5f64..0.99,
            alpha in 0.01f64..=1.0,
            visit_count_alpha in proptest::bool::ANY,
            seed in 0u64..1000,
        ) {
            use crate::envs::{CartPole, CartPoleSpec};
            // Cart-Pole rewards are +-1, so |delta_N| <= (1 - gamma^N) / (1 - gamma)
            // and |mgm| <= N^(1/N).
            let gamma_n = gamma.powi(n as i32);
            let max_blend = (1.0 - lambda) * (1.0 - gamma_n) / (1.0 - gamma)
                + lambda * (1.0 - gamma_n) * (n as f64).powf(1.0 / n as f64);
            let bound = max_blend / (1.0 - gamma_n);
            let c = LearnerConfig {
                lambda,
                n_steps: n,
                mode_e: if disjoint { WindowMode::Disjoint } else { WindowMode::Overlapping },
                gamma,
                alpha,
                visit_count_alpha,
                total_steps: 1_500,
                epsilon_decay_steps: 1_000,
                seed,
                ..LearnerConfig::default()
            };
            let mut env = CartPole::new(CartPoleSpec::default(), seed).unwrap();
            let q0 = QTable::zeros(env.n_states(), 2);
            let report = train(&mut env, &c, q0).unwrap();
            let worst = report.final_q.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            proptest::prop_assert!(worst <= bound * (1.0 + 1e-12), "max |q| {} exceeds {}", worst, bound);
        }
    }
}
