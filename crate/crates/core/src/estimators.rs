//! Sliding windows of transitions and the two aggregates computed on them:
//! the discounted N-step return and the modified geometric mean (MGM).

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Magnitudes below this are treated as a zero window sum by [`mgm`].
pub const MGM_ZERO_CUTOFF: f64 = 1e-300;

/// One environment interaction `(s, a, r, s')`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
    /// `next_state` ends the episode with no continuation value.
    #[serde(default)]
    pub terminal: bool,
}

/// Window progression mode (the dynamic-awareness flag `e`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(try_from = "u8", into = "u8")]
pub enum WindowMode {
    /// `e = 0`: stride 1, consecutive windows share N-1 transitions.
    #[default]
    Overlapping,
    /// `e = 1`: stride N, windows are disjoint.
    Disjoint,
}

impl TryFrom<u8> for WindowMode {
    type Error = Error;

    fn try_from(e: u8) -> Result<Self> {
        match e {
            0 => Ok(WindowMode::Overlapping),
            1 => Ok(WindowMode::Disjoint),
            other => Err(Error::invalid(format!("mode_e must be 0 or 1, got {other}"))),
        }
    }
}

impl From<WindowMode> for u8 {
    fn from(mode: WindowMode) -> u8 {
        match mode {
            WindowMode::Overlapping => 0,
            WindowMode::Disjoint => 1,
        }
    }
}

/// Fixed-capacity buffer that emits full windows of `N` transitions.
#[derive(Debug, Clone)]
pub struct WindowBuffer {
    slots: VecDeque<Transition>,
    capacity: usize,
    mode: WindowMode,
}

impl WindowBuffer {
    pub fn new(capacity: usize, mode: WindowMode) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::invalid("window capacity must be at least 1"));
        }
        Ok(Self {
            slots: VecDeque::with_capacity(capacity),
            capacity,
            mode,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn mode(&self) -> WindowMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Appends `t`; returns the full window when one is due.
    ///
    /// After emitting, the overlapping mode drops only the oldest transition
    /// and the disjoint mode empties the buffer.
    pub fn push(&mut self, t: Transition) -> Option<Vec<Transition>> {
        self.slots.push_back(t);
        if self.slots.len() < self.capacity {
            return None;
        }
        let window: Vec<Transition> = self.slots.iter().copied().collect();
        match self.mode {
            WindowMode::Overlapping => {
                self.slots.pop_front();
            }
            WindowMode::Disjoint => self.slots.clear(),
        }
        Some(window)
    }

    /// Drops any partial window, e.g. at an episode boundary.
    pub fn clear(&mut self) {
        self.slots.clear();
    }
}

/// Discounted return `sum_k gamma^k r_k`, accumulated front to back.
pub fn n_step_return(rewards: &[f64], gamma: f64) -> Result<f64> {
    if rewards.is_empty() {
        return Err(Error::invalid("n-step return of an empty window"));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::invalid(format!("gamma must lie in (0,1), got {gamma}")));
    }
    let mut total = 0.0;
    let mut discount = 1.0;
    for &r in rewards {
        total += discount * r;
        discount *= gamma;
    }
    Ok(total)
}

/// Undiscounted window total, checked against the expected width `n`.
pub fn window_sum(rewards: &[f64], n: usize) -> Result<f64> {
    if rewards.len() != n {
        return Err(Error::dim(format!(
            "window holds {} rewards, expected {n}",
            rewards.len()
        )));
    }
    Ok(rewards.iter().sum())
}

/// Modified geometric mean `sgn(R) |R|^(1/n)` of a window total `R`.
///
/// `sgn(0) = 0`, and magnitudes below [`MGM_ZERO_CUTOFF`] are treated as zero.
pub fn mgm(window_total: f64, n: usize) -> f64 {
    assert!(n >= 1, "mgm needs n >= 1");
    if n == 1 {
        return window_total;
    }
    let magnitude = window_total.abs();
    if magnitude < MGM_ZERO_CUTOFF {
        return 0.0;
    }
    let root = (magnitude.ln() / n as f64).exp();
    if window_total < 0.0 {
        -root
    } else {
        root
    }
}
