//! N-step Bellman optimality operators with growth-rate regularization.
//!
//! The regularized operator replaces each per-step reward `r(s,a)` of the
//! classical N-step optimality operator with
//! `(1 - lambda) r(s,a) + (1 - gamma) lambda G(s,a)`, where `G` is an
//! externally supplied table of time-average growth rates. Expectations are
//! taken exactly over the kernel, so the contraction modulus `gamma^N` can be
//! checked without sampling noise.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::mdp::{check_growth, shaped_reward, FiniteMdp, QTable};
use crate::{Error, Result};

const FIXED_POINT_MAX_ITERS: usize = 1_000_000;

/// Time-average growth rates indexed by `(s, a)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct GrowthTable {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

impl GrowthTable {
    pub fn new(n_states: usize, n_actions: usize, values: Vec<f64>) -> Result<Self> {
        if n_states == 0 || n_actions == 0 || values.len() != n_states * n_actions {
            return Err(Error::dim(format!(
                "growth table of {n_states}x{n_actions} cannot hold {} values",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("growth rates must be finite"));
        }
        Ok(Self {
            n_states,
            n_actions,
            values,
        })
    }

    pub fn constant(n_states: usize, n_actions: usize, value: f64) -> Self {
        Self {
            n_states,
            n_actions,
            values: vec![value; n_states * n_actions],
        }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, n_states: usize, n_actions: usize, scale: f64) -> Self {
        Self {
            n_states,
            n_actions,
            values: (0..n_states * n_actions)
                .map(|_| rng.random_range(-scale..=scale))
                .collect(),
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_actions + a]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

impl TryFrom<Vec<Vec<f64>>> for GrowthTable {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        let ns = rows.len();
        let na = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != na) {
            return Err(Error::dim("growth table rows must have equal length"));
        }
        GrowthTable::new(ns, na, rows.into_iter().flatten().collect())
    }
}

impl From<GrowthTable> for Vec<Vec<f64>> {
    fn from(g: GrowthTable) -> Self {
        g.values.chunks(g.n_actions).map(<[f64]>::to_vec).collect()
    }
}

/// Window length `N` and balance `lambda` of the regularized objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorConfig {
    pub n_steps: usize,
    pub lambda: f64,
}

impl OperatorConfig {
    pub fn new(n_steps: usize, lambda: f64) -> Result<Self> {
        let cfg = Self { n_steps, lambda };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_steps == 0 {
            return Err(Error::invalid("n_steps must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::invalid(format!("lambda must lie in [0,1], got {}", self.lambda)));
        }
        Ok(())
    }
}

fn check_q(mdp: &FiniteMdp, q: &QTable) -> Result<()> {
    if q.n_states() != mdp.n_states() || q.n_actions() != mdp.n_actions() {
        return Err(Error::dim(format!(
            "q-table is {}x{}, MDP is {}x{}",
            q.n_states(),
            q.n_actions(),
            mdp.n_states(),
            mdp.n_actions()
        )));
    }
    Ok(())
}

/// Layered N-step backup with per-step reward `reward(s, a)`.
///
/// The innermost layer is `V(s) = max_a q(s,a)`; each of the `n` layers
/// computes `reward(s,a) + gamma * sum_s' P(s'|s,a) V(s')` and the next
/// outer `V` takes the max over actions again. States and successors are
/// visited in index order, so results are reproducible bit for bit.
fn layered_backup(mdp: &FiniteMdp, q: &QTable, n: usize, reward: impl Fn(usize, usize) -> f64) -> QTable {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let gamma = mdp.gamma();
    let mut values: Vec<f64> = (0..ns).map(|s| q.max_value(s)).collect();
    let mut layer = QTable::zeros(ns, na);
    for step in 0..n {
        for s in 0..ns {
            for a in 0..na {
                let expected: f64 = mdp
                    .transition_row(s, a)
                    .iter()
                    .zip(&values)
                    .map(|(p, v)| p * v)
                    .sum();
                layer.set(s, a, reward(s, a) + gamma * expected);
            }
        }
        if step + 1 < n {
            for (s, v) in values.iter_mut().enumerate() {
                *v = layer.max_value(s);
            }
        }
    }
    layer
}

/// Classical N-step optimality operator `T^N q`.
pub fn standard_bellman_n(q: &QTable, mdp: &FiniteMdp, n: usize) -> Result<QTable> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    check_q(mdp, q)?;
    Ok(layered_backup(mdp, q, n, |s, a| mdp.reward(s, a)))
}

/// Growth-regularized N-step optimality operator `(T_G)^N q`.
pub fn regularized_bellman_n(
    q: &QTable,
    mdp: &FiniteMdp,
    growth: &GrowthTable,
    cfg: &OperatorConfig,
) -> Result<QTable> {
    cfg.validate()?;
    check_q(mdp, q)?;
    check_growth(mdp, growth)?;
    Ok(layered_backup(mdp, q, cfg.n_steps, |s, a| {
        shaped_reward(mdp, growth, cfg.lambda, s, a)
    }))
}

/// Result of [`fixed_point`].
#[derive(Debug, Clone)]
pub struct FixedPoint {
    pub q: QTable,
    pub iterations: usize,
    /// `||q_k - q_{k-1}||_inf` at termination.
    pub last_delta: f64,
}

/// Iterates `(T_G)^N` from `q = 0` until successive iterates differ by less
/// than `tol` in the infinity norm.
pub fn fixed_point(mdp: &FiniteMdp, growth: &GrowthTable, cfg: &OperatorConfig, tol: f64) -> Result<FixedPoint> {
    if !(tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let mut q = QTable::zeros(mdp.n_states(), mdp.n_actions());
    let mut delta = f64::INFINITY;
    for iteration in 1..=FIXED_POINT_MAX_ITERS {
        let next = regularized_bellman_n(&q, mdp, growth, cfg)?;
        delta = next.max_abs_diff(&q);
        q = next;
        if delta < tol {
            return Ok(FixedPoint {
                q,
                iterations: iteration,
                last_delta: delta,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: FIXED_POINT_MAX_ITERS,
        last_delta: delta,
        context: "regularized Bellman fixed point",
    })
}

/// Upper bound on the iterations [`fixed_point`] needs, from the `gamma^N`
/// contraction and the size of the first step `||q_1 - q_0||_inf`.
pub fn iteration_bound(first_delta: f64, gamma: f64, n_steps: usize, tol: f64) -> usize {
    let modulus = gamma.powi(n_steps as i32);
    if first_delta < tol {
        return 1;
    }
    let k = (tol * (1.0 - modulus) / first_delta).ln() / modulus.ln();
    k.ceil().max(0.0) as usize + 1
}

/// `||T q1 - T q2||_inf / ||q1 - q2||_inf` for the regularized operator.
pub fn contraction_ratio(
    mdp: &FiniteMdp,
    growth: &GrowthTable,
    cfg: &OperatorConfig,
    q1: &QTable,
    q2: &QTable,
) -> Result<f64> {
    let denom = q1.max_abs_diff(q2);
    if denom == 0.0 {
        return Err(Error::invalid("contraction ratio needs q1 != q2"));
    }
    let t1 = regularized_bellman_n(q1, mdp, growth, cfg)?;
    let t2 = regularized_bellman_n(q2, mdp, growth, cfg)?;
    Ok(t1.max_abs_diff(&t2) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::DeterministicPolicy;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Independent 1-step value iteration on `q`.
    fn value_iteration(mdp: &FiniteMdp, tol: f64) -> QTable {
        let (ns, na) = (mdp.n_states(), mdp.n_actions());
        let mut q = vec![0.0; ns * na];
        loop {
            let v: Vec<f64> = (0..ns)
                .map(|s| q[s * na..(s + 1) * na].iter().cloned().fold(f64::MIN, f64::max))
                .collect();
            let mut next = vec![0.0; ns * na];
            for s in 0..ns {
                for a in 0..na {
                    let mut e = 0.0;
                    for t in 0..ns {
                        e += mdp.transition_row(s, a)[t] * v[t];
                    }
                    next[s * na + a] = mdp.reward(s, a) + mdp.gamma() * e;
                }
            }
            let d = next.iter().zip(&q).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            q = next;
            if d < tol {
                return QTable::from_vec(ns, na, q).unwrap();
            }
        }
    }

    /// Brute-force `(T_G)^N q` by recursion over every length-`depth` state
    /// path; exponential in `depth`.
    fn path_enumeration(
        mdp: &FiniteMdp,
        growth: &GrowthTable,
        lambda: f64,
        q: &QTable,
        s: usize,
        a: usize,
        depth: usize,
    ) -> f64 {
        let g = mdp.gamma();
        let here = (1.0 - lambda) * mdp.reward(s, a) + (1.0 - g) * lambda * growth.get(s, a);
        let mut tail = 0.0;
        for (t, &p) in mdp.transition_row(s, a).iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let best = (0..mdp.n_actions())
                .map(|b| {
                    if depth == 1 {
                        q.get(t, b)
                    } else {
                        path_enumeration(mdp, growth, lambda, q, t, b, depth - 1)
                    }
                })
                .fold(f64::NEG_INFINITY, f64::max);
            tail += p * best;
        }
        here + g * tail
    }

    #[test]
    fn one_step_single_state() {
        let mdp = FiniteMdp::new(1, 2, vec![1.0, 1.0], vec![2.0, 2.0], 0.9).unwrap();
        let q = QTable::from_vec(1, 2, vec![1.0, 5.0]).unwrap();
        let out = standard_bellman_n(&q, &mdp, 1).unwrap();
        assert!((out.get(0, 0) - (2.0 + 0.9 * 5.0)).abs() < 1e-15);
        assert!((out.get(0, 1) - (2.0 + 0.9 * 5.0)).abs() < 1e-15);
    }

    #[test]
    fn two_step_is_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..25 {
            let mdp = FiniteMdp::random(&mut rng, 4, 3, 0.9).unwrap();
            let q = QTable::random(&mut rng, 4, 3, 5.0);
            let t2 = standard_bellman_n(&q, &mdp, 2).unwrap();
            let tt = standard_bellman_n(&standard_bellman_n(&q, &mdp, 1).unwrap(), &mdp, 1).unwrap();
            assert!(t2.max_abs_diff(&tt) < 1e-12);
        }
    }

    #[test]
    fn classical_fixed_point_is_invariant_for_all_n() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mdp = FiniteMdp::random(&mut rng, 4, 2, 0.8).unwrap();
        let q_star = value_iteration(&mdp, 1e-14);
        for n in 1..=5 {
            let t = standard_bellman_n(&q_star, &mdp, n).unwrap();
            assert!(t.max_abs_diff(&q_star) < 1e-12, "n={n}");
        }
    }

    #[test]
    fn lambda_zero_matches_standard_operator() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mdp = FiniteMdp::random(&mut rng, 5, 3, 0.9).unwrap();
        let growth = GrowthTable::random(&mut rng, 5, 3, 2.0);
        let q = QTable::random(&mut rng, 5, 3, 3.0);
        for n in [1, 2, 4] {
            let a = regularized_bellman_n(&q, &mdp, &growth, &OperatorConfig::new(n, 0.0).unwrap()).unwrap();
            let b = standard_bellman_n(&q, &mdp, n).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn lambda_one_constant_growth_is_fixed() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mdp = FiniteMdp::random(&mut rng, 3, 2, 0.9).unwrap();
        let growth = GrowthTable::constant(3, 2, 3.0);
        let cfg = OperatorConfig::new(3, 1.0).unwrap();
        let q = QTable::filled(3, 2, 3.0);
        let out = regularized_bellman_n(&q, &mdp, &growth, &cfg).unwrap();
        assert!(out.max_abs_diff(&q) < 1e-12);

        let fp = fixed_point(&mdp, &growth, &cfg, 1e-10).unwrap();
        assert!(fp.q.values().iter().all(|v| (v - 3.0).abs() < 1e-9));
    }

    #[test]
    fn matches_path_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..10 {
            let mdp = FiniteMdp::random(&mut rng, 3, 2, 0.9).unwrap();
            let growth = GrowthTable::random(&mut rng, 3, 2, 1.0);
            let q = QTable::random(&mut rng, 3, 2, 2.0);
            for n in [1, 2, 3] {
                let cfg = OperatorConfig::new(n, 0.5).unwrap();
                let out = regularized_bellman_n(&q, &mdp, &growth, &cfg).unwrap();
                for s in 0..3 {
                    for a in 0..2 {
                        let oracle = path_enumeration(&mdp, &growth, 0.5, &q, s, a, n);
                        assert!((out.get(s, a) - oracle).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn n_step_equals_repeated_one_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        for _ in 0..20 {
            let mdp = FiniteMdp::random(&mut rng, 4, 3, 0.9).unwrap();
            let growth = GrowthTable::random(&mut rng, 4, 3, 1.0);
            let q = QTable::random(&mut rng, 4, 3, 2.0);
            let one = OperatorConfig::new(1, 0.3).unwrap();
            let mut repeated = q.clone();
            for _ in 0..4 {
                repeated = regularized_bellman_n(&repeated, &mdp, &growth, &one).unwrap();
            }
            let direct = regularized_bellman_n(&q, &mdp, &growth, &OperatorConfig::new(4, 0.3).unwrap()).unwrap();
            assert!(direct.max_abs_diff(&repeated) < 1e-12);
        }
    }

    #[test]
    fn lambda_zero_fixed_point_is_classical_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mdp = FiniteMdp::random(&mut rng, 4, 3, 0.9).unwrap();
        let growth = GrowthTable::random(&mut rng, 4, 3, 1.0);
        let fp = fixed_point(&mdp, &growth, &OperatorConfig::new(2, 0.0).unwrap(), 1e-12).unwrap();
        let oracle = value_iteration(&mdp, 1e-13);
        assert!(fp.q.max_abs_diff(&oracle) < 1e-9);
    }

    #[test]
    fn fixed_point_residual_and_iteration_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for n in [1, 2, 5] {
            let mdp = FiniteMdp::random(&mut rng, 5, 2, 0.9).unwrap();
            let growth = GrowthTable::random(&mut rng, 5, 2, 1.0);
            let cfg = OperatorConfig::new(n, 0.5).unwrap();
            let tol = 1e-10;
            let fp = fixed_point(&mdp, &growth, &cfg, tol).unwrap();
            let residual = regularized_bellman_n(&fp.q, &mdp, &growth, &cfg).unwrap().max_abs_diff(&fp.q);
            assert!(residual < 10.0 * tol);

            let q1 = regularized_bellman_n(&QTable::zeros(5, 2), &mdp, &growth, &cfg).unwrap();
            let first = q1.max_abs_diff(&QTable::zeros(5, 2));
            assert!(fp.iterations <= iteration_bound(first, 0.9, n, tol));
        }
    }

    #[test]
    fn fixed_point_greedy_matches_enumeration() {
        use crate::mdp::{enumerate_optimal_policy, policy_evaluation_regularized};
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..10 {
            let mdp = FiniteMdp::random(&mut rng, 3, 2, 0.9).unwrap();
            let growth = GrowthTable::random(&mut rng, 3, 2, 1.0);
            let cfg = OperatorConfig::new(2, 0.5).unwrap();
            let fp = fixed_point(&mdp, &growth, &cfg, 1e-12).unwrap();
            let best = enumerate_optimal_policy(&mdp, |_| Ok(growth.clone()), 0.5).unwrap();
            assert!(best.dominant);
            let greedy = DeterministicPolicy::new((0..3).map(|s| fp.q.argmax(s)).collect(), 2).unwrap();
            assert_eq!(greedy, best.policy);
            let q_pi = policy_evaluation_regularized(&mdp, &greedy, &growth, 0.5).unwrap();
            assert!(q_pi.max_abs_diff(&fp.q) < 1e-9);
        }
    }

    #[test]
    fn constant_shift_is_tight() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let mdp = FiniteMdp::random(&mut rng, 4, 3, 0.9).unwrap();
        let growth = GrowthTable::random(&mut rng, 4, 3, 1.0);
        let cfg = OperatorConfig::new(2, 0.5).unwrap();
        let q1 = QTable::random(&mut rng, 4, 3, 1.0);
        let q2 = q1.map(|v| v + 0.75);
        let ratio = contraction_ratio(&mdp, &growth, &cfg, &q1, &q2).unwrap();
        assert!((ratio - 0.81).abs() < 1e-12);
    }

    #[test]
    fn contraction_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let mdp = FiniteMdp::random(&mut rng, 4, 3, 0.9).unwrap();
        let growth = GrowthTable::random(&mut rng, 4, 3, 1.0);
        let cfg = OperatorConfig::new(2, 0.5).unwrap();
        for _ in 0..1000 {
            let q1 = QTable::random(&mut rng, 4, 3, 5.0);
            let q2 = QTable::random(&mut rng, 4, 3, 5.0);
            assert!(contraction_ratio(&mdp, &growth, &cfg, &q1, &q2).unwrap() <= 0.81 + 1e-9);
        }
    }

    #[test]
    fn contraction_near_tight_structured_pairs() {
        // Pairs whose rows share an argmax: the max passes through the
        // difference, which is where the bound comes closest to equality.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mdp = FiniteMdp::random(&mut rng, 3, 2, 0.9).unwrap();
        let growth = GrowthTable::random(&mut rng, 3, 2, 1.0);
        let cfg = OperatorConfig::new(2, 0.5).unwrap();
        let mut worst: f64 = 0.0;
        for _ in 0..2000 {
            let q1 = QTable::random(&mut rng, 3, 2, 1.0);
            let bump = rng.random_range(0.01..1.0);
            let mut values = q1.values().to_vec();
            for s in 0..3 {
                let a = q1.argmax(s);
                values[s * 2 + a] += bump * rng.random_range(0.9..=1.0);
            }
            let q2 = QTable::from_vec(3, 2, values).unwrap();
            let ratio = contraction_ratio(&mdp, &growth, &cfg, &q1, &q2).unwrap();
            assert!(ratio <= 0.81 + 1e-9);
            worst = worst.max(ratio);
        }
        assert!(worst > 0.7, "structured search should approach the bound, got {worst}");
    }

    #[test]
    fn contraction_rejects_equal_inputs() {
        let mdp = FiniteMdp::new(1, 1, vec![1.0], vec![0.0], 0.5).unwrap();
        let q = QTable::zeros(1, 1);
        let cfg = OperatorConfig::new(1, 0.0).unwrap();
        assert!(contraction_ratio(&mdp, &GrowthTable::constant(1, 1, 0.0), &cfg, &q, &q).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(OperatorConfig::new(0, 0.5).is_err());
        assert!(OperatorConfig::new(1, 1.5).is_err());
        assert!(OperatorConfig::new(1, -0.1).is_err());
    }
}
