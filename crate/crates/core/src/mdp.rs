//! Finite Markov decision processes and exact evaluation oracles.
//!
//! Everything here is a pure function over immutable inputs. The exact
//! solvers (stationary distributions, regularized policy evaluation and
//! brute-force policy enumeration) serve as ground truth for the
//! [`operators`](crate::operators) module.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::operators::GrowthTable;
use crate::{Error, Result};

/// Tolerance on row sums of transition kernels.
pub const ROW_SUM_TOL: f64 = 1e-12;

const STATIONARY_TOL: f64 = 1e-12;
const STATIONARY_MAX_ITERS: usize = 1_000_000;
const MAX_ENUMERATED_POLICIES: u64 = 1_000_000;

/// A finite MDP with tabular kernel `P(s'|s,a)` and reward `r(s,a)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MdpRepr", into = "MdpRepr")]
pub struct FiniteMdp {
    n_states: usize,
    n_actions: usize,
    gamma: f64,
    // Flattened [s][a][s'].
    transition: Vec<f64>,
    // Flattened [s][a].
    reward: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MdpRepr {
    n_states: usize,
    n_actions: usize,
    gamma: f64,
    transition: Vec<Vec<Vec<f64>>>,
    reward: Vec<Vec<f64>>,
}

impl TryFrom<MdpRepr> for FiniteMdp {
    type Error = Error;

    fn try_from(repr: MdpRepr) -> Result<Self> {
        let (ns, na) = (repr.n_states, repr.n_actions);
        if repr.transition.len() != ns || repr.reward.len() != ns {
            return Err(Error::dim("transition/reward outer length must equal n_states"));
        }
        let mut transition = Vec::with_capacity(ns * na * ns);
        for per_state in &repr.transition {
            if per_state.len() != na {
                return Err(Error::dim("transition[s] must have n_actions rows"));
            }
            for row in per_state {
                if row.len() != ns {
                    return Err(Error::dim("transition[s][a] must have n_states entries"));
                }
                transition.extend_from_slice(row);
            }
        }
        let mut reward = Vec::with_capacity(ns * na);
        for row in &repr.reward {
            if row.len() != na {
                return Err(Error::dim("reward[s] must have n_actions entries"));
            }
            reward.extend_from_slice(row);
        }
        FiniteMdp::new(ns, na, transition, reward, repr.gamma)
    }
}

impl From<FiniteMdp> for MdpRepr {
    fn from(m: FiniteMdp) -> Self {
        let (ns, na) = (m.n_states, m.n_actions);
        let transition = (0..ns)
            .map(|s| (0..na).map(|a| m.transition_row(s, a).to_vec()).collect())
            .collect();
        let reward = m.reward.chunks(na).map(<[f64]>::to_vec).collect();
        MdpRepr {
            n_states: ns,
            n_actions: na,
            gamma: m.gamma,
            transition,
            reward,
        }
    }
}

impl FiniteMdp {
    /// Builds an MDP from flattened `[s][a][s']` transitions and `[s][a]` rewards.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
        gamma: f64,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::invalid("n_states and n_actions must be positive"));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::invalid(format!("gamma must lie in (0,1), got {gamma}")));
        }
        if transition.len() != n_states * n_actions * n_states {
            return Err(Error::dim(format!(
                "transition has {} entries, expected {}",
                transition.len(),
                n_states * n_actions * n_states
            )));
        }
        if reward.len() != n_states * n_actions {
            return Err(Error::dim(format!(
                "reward has {} entries, expected {}",
                reward.len(),
                n_states * n_actions
            )));
        }
        if reward.iter().any(|r| !r.is_finite()) {
            return Err(Error::invalid("rewards must be finite"));
        }
        for (i, row) in transition.chunks(n_states).enumerate() {
            check_distribution(row).map_err(|msg| {
                Error::invalid(format!(
                    "P(.|s={},a={}) {msg}",
                    i / n_actions,
                    i % n_actions
                ))
            })?;
        }
        Ok(Self {
            n_states,
            n_actions,
            gamma,
            transition,
            reward,
        })
    }

    /// Random instance with Dirichlet(1)-like kernels and rewards in `[-1, 1]`.
    pub fn random<R: Rng + ?Sized>(
        rng: &mut R,
        n_states: usize,
        n_actions: usize,
        gamma: f64,
    ) -> Result<Self> {
        let mut transition = Vec::with_capacity(n_states * n_actions * n_states);
        for _ in 0..n_states * n_actions {
            transition.extend(random_distribution(rng, n_states));
        }
        let reward = (0..n_states * n_actions)
            .map(|_| rng.random_range(-1.0..=1.0))
            .collect();
        Self::new(n_states, n_actions, transition, reward, gamma)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `P(.|s,a)` as a slice over next states.
    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.transition[start..start + self.n_states]
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.n_actions + a]
    }

    /// Same MDP with a different discount.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(
            self.n_states,
            self.n_actions,
            self.transition.clone(),
            self.reward.clone(),
            gamma,
        )
    }

    /// Same dynamics with the reward table replaced.
    pub fn with_reward(&self, reward: Vec<f64>) -> Result<Self> {
        Self::new(
            self.n_states,
            self.n_actions,
            self.transition.clone(),
            reward,
            self.gamma,
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn check_distribution(row: &[f64]) -> std::result::Result<(), String> {
    if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err("has a negative or non-finite entry".into());
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > ROW_SUM_TOL {
        return Err(format!("sums to {sum}, not 1"));
    }
    Ok(())
}

/// A random probability vector; the last entry absorbs rounding so the row
/// sums to one well inside [`ROW_SUM_TOL`].
pub fn random_distribution<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    let head: f64 = w[..n - 1].iter().sum();
    w[n - 1] = (1.0 - head).max(0.0);
    w
}

/// Row-stochastic square matrix, e.g. the chain `P^pi` induced by a policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct StochasticMatrix {
    n: usize,
    data: Vec<f64>,
}

impl StochasticMatrix {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || data.len() != n * n {
            return Err(Error::dim(format!("expected {n}x{n} entries, got {}", data.len())));
        }
        for (s, row) in data.chunks(n).enumerate() {
            check_distribution(row).map_err(|msg| Error::invalid(format!("row {s} {msg}")))?;
        }
        Ok(Self { n, data })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::dim("chain must be square"));
        }
        Self::new(n, rows.into_iter().flatten().collect())
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Self {
        let data = (0..n).flat_map(|_| random_distribution(rng, n)).collect();
        Self::new(n, data).expect("random rows are distributions")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.data[s * self.n..(s + 1) * self.n]
    }

    pub fn get(&self, s: usize, t: usize) -> f64 {
        self.data[s * self.n + t]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    /// `d * P` for a row vector `d`.
    pub fn left_mul(&self, d: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (s, &ds) in d.iter().enumerate() {
            if ds == 0.0 {
                continue;
            }
            for (o, &p) in out.iter_mut().zip(self.row(s)) {
                *o += ds * p;
            }
        }
        out
    }
}

impl TryFrom<Vec<Vec<f64>>> for StochasticMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(rows)
    }
}

impl From<StochasticMatrix> for Vec<Vec<f64>> {
    fn from(m: StochasticMatrix) -> Self {
        m.rows()
    }
}

/// `pi(s)` for every state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DeterministicPolicy {
    action_of: Vec<usize>,
}

impl DeterministicPolicy {
    pub fn new(action_of: Vec<usize>, n_actions: usize) -> Result<Self> {
        if action_of.is_empty() {
            return Err(Error::invalid("policy must cover at least one state"));
        }
        if let Some((s, a)) = action_of.iter().enumerate().find(|(_, a)| **a >= n_actions) {
            return Err(Error::invalid(format!(
                "policy maps state {s} to action {a}, but only {n_actions} actions exist"
            )));
        }
        Ok(Self { action_of })
    }

    /// Policy that plays `action` everywhere.
    pub fn constant(n_states: usize, action: usize) -> Self {
        Self {
            action_of: vec![action; n_states],
        }
    }

    pub fn action(&self, s: usize) -> usize {
        self.action_of[s]
    }

    pub fn actions(&self) -> &[usize] {
        &self.action_of
    }

    pub fn n_states(&self) -> usize {
        self.action_of.len()
    }

    fn check_for(&self, mdp: &FiniteMdp) -> Result<()> {
        if self.n_states() != mdp.n_states() {
            return Err(Error::dim(format!(
                "policy covers {} states, MDP has {}",
                self.n_states(),
                mdp.n_states()
            )));
        }
        if self.action_of.iter().any(|&a| a >= mdp.n_actions()) {
            return Err(Error::invalid("policy action out of range"));
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("state,action\n");
        for (s, a) in self.action_of.iter().enumerate() {
            let _ = writeln!(out, "{s},{a}");
        }
        out
    }
}

/// Action values `q(s,a)`, row-major over states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct QTable {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self::filled(n_states, n_actions, 0.0)
    }

    pub fn filled(n_states: usize, n_actions: usize, value: f64) -> Self {
        Self {
            n_states,
            n_actions,
            values: vec![value; n_states * n_actions],
        }
    }

    pub fn from_vec(n_states: usize, n_actions: usize, values: Vec<f64>) -> Result<Self> {
        if n_states == 0 || n_actions == 0 || values.len() != n_states * n_actions {
            return Err(Error::dim(format!(
                "q-table of {n_states}x{n_actions} cannot hold {} values",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("q-table entries must be finite"));
        }
        Ok(Self {
            n_states,
            n_actions,
            values,
        })
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, n_states: usize, n_actions: usize, scale: f64) -> Self {
        let values = (0..n_states * n_actions)
            .map(|_| rng.random_range(-scale..=scale))
            .collect();
        Self {
            n_states,
            n_actions,
            values,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_actions + a]
    }

    #[inline]
    pub fn set(&mut self, s: usize, a: usize, value: f64) {
        self.values[s * self.n_actions + a] = value;
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `max_a q(s,a)`.
    pub fn max_value(&self, s: usize) -> f64 {
        self.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Greedy action in `s`; ties go to the smallest index.
    pub fn argmax(&self, s: usize) -> usize {
        let row = self.row(s);
        let mut best = 0;
        for (a, &v) in row.iter().enumerate().skip(1) {
            if v > row[best] {
                best = a;
            }
        }
        best
    }

    pub fn same_shape(&self, other: &QTable) -> bool {
        self.n_states == other.n_states && self.n_actions == other.n_actions
    }

    /// `||self - other||_inf` (max absolute entry).
    pub fn max_abs_diff(&self, other: &QTable) -> f64 {
        debug_assert!(self.same_shape(other));
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> QTable {
        QTable {
            n_states: self.n_states,
            n_actions: self.n_actions,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.values.chunks(self.n_actions).map(<[f64]>::to_vec).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// `state,action,value` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("state,action,value\n");
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                let _ = writeln!(out, "{s},{a},{}", self.get(s, a));
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("state,action,value") {
            return Err(Error::invalid("q-table csv must start with `state,action,value`"));
        }
        let mut entries = Vec::new();
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let bad = || Error::invalid(format!("malformed q-table csv row {}", i + 2));
            let mut fields = line.split(',');
            let s: usize = fields.next().and_then(|f| f.trim().parse().ok()).ok_or_else(bad)?;
            let a: usize = fields.next().and_then(|f| f.trim().parse().ok()).ok_or_else(bad)?;
            let v: f64 = fields.next().and_then(|f| f.trim().parse().ok()).ok_or_else(bad)?;
            entries.push((s, a, v));
        }
        let ns = entries.iter().map(|e| e.0 + 1).max().unwrap_or(0);
        let na = entries.iter().map(|e| e.1 + 1).max().unwrap_or(0);
        if entries.len() != ns * na {
            return Err(Error::dim("q-table csv does not cover a full grid"));
        }
        let mut q = QTable::zeros(ns, na);
        for (s, a, v) in entries {
            q.set(s, a, v);
        }
        QTable::from_vec(ns, na, q.values)
    }
}

impl TryFrom<Vec<Vec<f64>>> for QTable {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        let ns = rows.len();
        let na = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != na) {
            return Err(Error::dim("q-table rows must have equal length"));
        }
        QTable::from_vec(ns, na, rows.into_iter().flatten().collect())
    }
}

impl From<QTable> for Vec<Vec<f64>> {
    fn from(q: QTable) -> Self {
        q.rows()
    }
}

/// Long-run state-visit frequencies `d` with `d P = d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryDistribution {
    pub probs: Vec<f64>,
}

impl StationaryDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::invalid("stationary probabilities must be nonnegative"));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-10 {
            return Err(Error::invalid(format!("stationary probabilities sum to {sum}")));
        }
        Ok(Self { probs })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// The chain `P^pi` with row `s` equal to `P(.|s, pi(s))`.
pub fn induced_chain(mdp: &FiniteMdp, policy: &DeterministicPolicy) -> Result<StochasticMatrix> {
    policy.check_for(mdp)?;
    let n = mdp.n_states();
    let data = (0..n)
        .flat_map(|s| mdp.transition_row(s, policy.action(s)).iter().copied())
        .collect();
    StochasticMatrix::new(n, data)
}

/// Power iteration from the point mass on state 0.
///
/// A periodic chain keeps oscillating from that start and is reported as
/// [`Error::NoConvergence`] once the iteration cap is hit.
pub fn stationary_distribution(chain: &StochasticMatrix) -> Result<StationaryDistribution> {
    let n = chain.n();
    let mut d = vec![0.0; n];
    d[0] = 1.0;
    let mut delta = f64::INFINITY;
    for _ in 0..STATIONARY_MAX_ITERS {
        let mut next = chain.left_mul(&d);
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= total);
        delta = next
            .iter()
            .zip(&d)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        d = next;
        if delta < STATIONARY_TOL {
            return StationaryDistribution::new(d);
        }
    }
    Err(Error::NoConvergence {
        iterations: STATIONARY_MAX_ITERS,
        last_delta: delta,
        context: "stationary distribution (chain likely periodic or reducible)",
    })
}

/// Per-step reward of the regularized objective:
/// `(1 - lambda) r(s,a) + (1 - gamma) lambda G(s,a)`.
pub(crate) fn shaped_reward(mdp: &FiniteMdp, growth: &GrowthTable, lambda: f64, s: usize, a: usize) -> f64 {
    (1.0 - lambda) * mdp.reward(s, a) + (1.0 - mdp.gamma()) * lambda * growth.get(s, a)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::invalid(format!("lambda must lie in [0,1], got {lambda}")));
    }
    Ok(())
}

pub(crate) fn check_growth(mdp: &FiniteMdp, growth: &GrowthTable) -> Result<()> {
    if growth.n_states() != mdp.n_states() || growth.n_actions() != mdp.n_actions() {
        return Err(Error::dim(format!(
            "growth table is {}x{}, MDP is {}x{}",
            growth.n_states(),
            growth.n_actions(),
            mdp.n_states(),
            mdp.n_actions()
        )));
    }
    Ok(())
}

/// Exact `q^pi_G`: the solution of
/// `q = (1-lambda) r + (1-gamma) lambda G + gamma P^pi q` by a dense LU solve.
pub fn policy_evaluation_regularized(
    mdp: &FiniteMdp,
    policy: &DeterministicPolicy,
    growth: &GrowthTable,
    lambda: f64,
) -> Result<QTable> {
    policy.check_for(mdp)?;
    check_growth(mdp, growth)?;
    check_lambda(lambda)?;

    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let dim = ns * na;
    let gamma = mdp.gamma();
    let mut system = DMatrix::<f64>::identity(dim, dim);
    let mut rhs = DVector::<f64>::zeros(dim);
    for s in 0..ns {
        for a in 0..na {
            let row = s * na + a;
            rhs[row] = shaped_reward(mdp, growth, lambda, s, a);
            for (next, &p) in mdp.transition_row(s, a).iter().enumerate() {
                system[(row, next * na + policy.action(next))] -= gamma * p;
            }
        }
    }
    let solution = system
        .lu()
        .solve(&rhs)
        .expect("I - gamma P^pi is nonsingular for gamma < 1");
    let q = QTable::from_vec(ns, na, solution.iter().copied().collect())?;

    debug_assert!({
        let mapped = policy_affine_map(mdp, policy, growth, lambda, &q);
        mapped.max_abs_diff(&q) < 1e-10 * (1.0 + q.values().iter().fold(0.0f64, |m, v| m.max(v.abs())))
    });
    Ok(q)
}

/// One application of `q -> (1-lambda) r + (1-gamma) lambda G + gamma P^pi q`.
pub fn policy_affine_map(
    mdp: &FiniteMdp,
    policy: &DeterministicPolicy,
    growth: &GrowthTable,
    lambda: f64,
    q: &QTable,
) -> QTable {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let mut out = QTable::zeros(ns, na);
    for s in 0..ns {
        for a in 0..na {
            let next: f64 = mdp
                .transition_row(s, a)
                .iter()
                .enumerate()
                .map(|(t, &p)| p * q.get(t, policy.action(t)))
                .sum();
            out.set(s, a, shaped_reward(mdp, growth, lambda, s, a) + mdp.gamma() * next);
        }
    }
    out
}

/// Outcome of [`enumerate_optimal_policy`].
#[derive(Debug, Clone)]
pub struct EnumeratedOptimum {
    pub policy: DeterministicPolicy,
    pub q: QTable,
    /// Whether `policy` dominates every other policy at every `(s,a)`.
    pub dominant: bool,
}

/// Iterates all `|A|^|S|` deterministic policies in lexicographic order.
pub fn all_policies(n_states: usize, n_actions: usize) -> impl Iterator<Item = DeterministicPolicy> {
    let total = (n_actions as u64).checked_pow(n_states as u32).unwrap_or(u64::MAX);
    (0..total).map(move |mut code| {
        let mut actions = vec![0; n_states];
        for slot in actions.iter_mut().rev() {
            *slot = (code % n_actions as u64) as usize;
            code /= n_actions as u64;
        }
        DeterministicPolicy { action_of: actions }
    })
}

/// Brute-force `argmax_pi q^pi_G` over all deterministic policies.
///
/// The returned policy is the lexicographically smallest one whose `q^pi_G`
/// dominates every other policy element-wise (tolerance 1e-10). If no policy
/// dominates, the policy with the largest `sum_{s,a} q^pi_G` is returned with
/// `dominant = false`. Only meant as a test oracle on tiny instances.
pub fn enumerate_optimal_policy<F>(
    mdp: &FiniteMdp,
    mut growth_of: F,
    lambda: f64,
) -> Result<EnumeratedOptimum>
where
    F: FnMut(&DeterministicPolicy) -> Result<GrowthTable>,
{
    let count = (mdp.n_actions() as u64)
        .checked_pow(mdp.n_states() as u32)
        .filter(|&c| c <= MAX_ENUMERATED_POLICIES)
        .ok_or_else(|| {
            Error::TooLarge(format!(
                "{}^{} policies exceeds the enumeration limit of {MAX_ENUMERATED_POLICIES}",
                mdp.n_actions(),
                mdp.n_states()
            ))
        })?;

    let mut evaluated = Vec::with_capacity(count as usize);
    for policy in all_policies(mdp.n_states(), mdp.n_actions()) {
        let growth = growth_of(&policy)?;
        let q = policy_evaluation_regularized(mdp, &policy, &growth, lambda)?;
        evaluated.push((policy, q));
    }

    const DOMINANCE_TOL: f64 = 1e-10;
    let dominant = evaluated.iter().position(|(_, q)| {
        evaluated.iter().all(|(_, other)| {
            q.values()
                .iter()
                .zip(other.values())
                .all(|(mine, theirs)| *mine >= *theirs - DOMINANCE_TOL)
        })
    });
    let (index, dominant) = match dominant {
        Some(i) => (i, true),
        None => {
            let mut best = 0;
            let mut best_total = f64::NEG_INFINITY;
            for (i, (_, q)) in evaluated.iter().enumerate() {
                let total: f64 = q.values().iter().sum();
                if total > best_total {
                    best = i;
                    best_total = total;
                }
            }
            (best, false)
        }
    };
    let (policy, q) = evaluated.swap_remove(index);
    Ok(EnumeratedOptimum { policy, q, dominant })
}
