//! Plain multi-step Q-learning, written independently of the window buffer
//! and estimator code so it can serve as a reference for the `lambda = 0`,
//! overlapping-window case of the regularized learner.

use std::collections::VecDeque;

use crate::envs::Environment;
use crate::mdp::QTable;
use crate::Result;

use super::{agent_rng, check_env, epsilon_greedy, LearnerConfig};

/// One entry of the Q trace: the updated pair and its new value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub step: usize,
    pub state: usize,
    pub action: usize,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct BaselineReport {
    pub final_q: QTable,
    pub trace: Vec<TraceEntry>,
}

struct Step {
    state: usize,
    action: usize,
    reward: f64,
    next_state: usize,
    terminal: bool,
}

/// Multi-step Q-learning with stride-1 windows of `cfg.n_steps` rewards.
///
/// Uses the same exploration stream and schedule as the regularized learner;
/// `cfg.lambda`, `cfg.mode_e` and `cfg.visit_count_alpha` are ignored.
pub fn train_multistep_q<E: Environment + ?Sized>(
    env: &mut E,
    cfg: &LearnerConfig,
    q0: QTable,
) -> Result<BaselineReport> {
    cfg.validate()?;
    check_env(env, &q0)?;
    let n = cfg.n_steps;
    let gamma_n = cfg.gamma.powi(n as i32);
    let mut rng = agent_rng(cfg.seed);
    let mut q = q0;
    let mut recent: VecDeque<Step> = VecDeque::with_capacity(n + 1);
    let mut trace = Vec::new();
    let mut state = env.reset();

    for step in 0..cfg.total_steps {
        let action = epsilon_greedy(&mut rng, &q, state, cfg.epsilon(step));
        let obs = env.step(action)?;
        recent.push_back(Step {
            state,
            action,
            reward: obs.reward,
            next_state: obs.state,
            terminal: obs.terminated && !obs.truncated,
        });

        if recent.len() == n {
            let mut ret = 0.0;
            let mut discount = 1.0;
            for s in &recent {
                ret += discount * s.reward;
                discount *= cfg.gamma;
            }
            let last = recent.back().expect("full window");
            let tail = if last.terminal { 0.0 } else { q.max_value(last.next_state) };
            let head = recent.pop_front().expect("full window");
            let old = q.get(head.state, head.action);
            let value = (1.0 - cfg.alpha) * old + cfg.alpha * (ret + gamma_n * tail);
            q.set(head.state, head.action, value);
            trace.push(TraceEntry {
                step,
                state: head.state,
                action: head.action,
                value,
            });
        }

        if obs.terminated {
            recent.clear();
            state = env.reset();
        } else {
            state = obs.state;
        }
    }

    Ok(BaselineReport { final_q: q, trace })
}
