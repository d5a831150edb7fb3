//! Cart-Pole with a uniform-grid state discretization.
//!
//! Physics follow the usual benchmark constants and integrate with
//! semi-implicit Euler. The learner sees a bucket index over
//! `(x, x_dot, theta, theta_dot)`; reward is +1 per balanced step and -1 on
//! the step that drops the pole or leaves the track.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{EnvObservation, Environment};
use crate::{Error, Result};

/// `[x, x_dot, theta, theta_dot]`.
pub type CartPoleState = [f64; 4];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CartPoleSpec {
    pub gravity: f64,
    pub cart_mass: f64,
    pub pole_mass: f64,
    pub pole_half_length: f64,
    pub force_mag: f64,
    pub tau: f64,
    pub x_threshold: f64,
    pub theta_threshold_deg: f64,
    pub max_steps: usize,
    /// Buckets for `[x, x_dot, theta, theta_dot]`.
    pub buckets: [usize; 4],
    /// Symmetric clip range per dimension; values outside land in the
    /// edge bucket.
    pub clip: [f64; 4],
}

impl Default for CartPoleSpec {
    fn default() -> Self {
        Self {
            gravity: 9.8,
            cart_mass: 1.0,
            pole_mass: 0.1,
            pole_half_length: 0.5,
            force_mag: 10.0,
            tau: 0.02,
            x_threshold: 2.4,
            theta_threshold_deg: 12.0,
            max_steps: 500,
            buckets: [3, 3, 6, 3],
            clip: [2.4, 3.0, 12f64.to_radians(), 3.5],
        }
    }
}

impl CartPoleSpec {
    pub fn validate(&self) -> Result<()> {
        let constants = [
            self.gravity,
            self.cart_mass,
            self.pole_mass,
            self.pole_half_length,
            self.force_mag,
            self.tau,
            self.x_threshold,
            self.theta_threshold_deg,
        ];
        if constants.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
            return Err(Error::invalid("cart-pole constants must be positive"));
        }
        if self.buckets.contains(&0) {
            return Err(Error::invalid("bucket counts must be at least 1"));
        }
        if self.clip.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
            return Err(Error::invalid("clip ranges must be positive"));
        }
        Ok(())
    }

    pub fn theta_threshold(&self) -> f64 {
        self.theta_threshold_deg.to_radians()
    }

    pub fn n_states(&self) -> usize {
        self.buckets.iter().product()
    }

    pub fn out_of_bounds(&self, state: &CartPoleState) -> bool {
        state[0].abs() > self.x_threshold || state[2].abs() > self.theta_threshold()
    }
}

/// Advances the physics by one `tau`. Action 0 pushes left, anything else
/// pushes right. Returns `(state, reward, terminated)`.
pub fn cartpole_step(spec: &CartPoleSpec, state: &CartPoleState, action: usize) -> (CartPoleState, f64, bool) {
    let [x, x_dot, theta, theta_dot] = *state;
    let force = if action == 0 { -spec.force_mag } else { spec.force_mag };
    let total_mass = spec.cart_mass + spec.pole_mass;
    let polemass_length = spec.pole_mass * spec.pole_half_length;
    let (sin, cos) = theta.sin_cos();

    let temp = (force + polemass_length * theta_dot * theta_dot * sin) / total_mass;
    let theta_acc = (spec.gravity * sin - cos * temp)
        / (spec.pole_half_length * (4.0 / 3.0 - spec.pole_mass * cos * cos / total_mass));
    let x_acc = temp - polemass_length * theta_acc * cos / total_mass;

    let x_dot = x_dot + spec.tau * x_acc;
    let x = x + spec.tau * x_dot;
    let theta_dot = theta_dot + spec.tau * theta_acc;
    let theta = theta + spec.tau * theta_dot;

    let next = [x, x_dot, theta, theta_dot];
    let dropped = spec.out_of_bounds(&next);
    (next, if dropped { -1.0 } else { 1.0 }, dropped)
}

/// Row-major bucket index of a continuous state. Total over all inputs:
/// values beyond the clip range (including infinities) go to the edge
/// bucket and NaN goes to bucket 0.
pub fn discretize(state: &CartPoleState, spec: &CartPoleSpec) -> usize {
    let mut index = 0;
    for dim in 0..4 {
        let n = spec.buckets[dim];
        let half = spec.clip[dim];
        let v = state[dim];
        let bucket = if v.is_nan() {
            0
        } else {
            let unit = (v.clamp(-half, half) + half) / (2.0 * half);
            ((unit * n as f64).floor() as usize).min(n - 1)
        };
        index = index * n + bucket;
    }
    index
}

#[derive(Debug, Clone)]
pub struct CartPole {
    spec: CartPoleSpec,
    rng: ChaCha8Rng,
    state: CartPoleState,
    t: usize,
}

impl CartPole {
    pub fn new(spec: CartPoleSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            spec,
            rng: ChaCha8Rng::seed_from_u64(seed),
            state: [0.0; 4],
            t: 0,
        })
    }

    pub fn state(&self) -> CartPoleState {
        self.state
    }
}

impl Environment for CartPole {
    fn n_states(&self) -> usize {
        self.spec.n_states()
    }

    fn n_actions(&self) -> usize {
        2
    }

    fn reset(&mut self) -> usize {
        for v in &mut self.state {
            *v = self.rng.random_range(-0.05..0.05);
        }
        self.t = 0;
        discretize(&self.state, &self.spec)
    }

    fn step(&mut self, action: usize) -> Result<EnvObservation> {
        if action > 1 {
            return Err(Error::invalid(format!("cart-pole has no action {action}")));
        }
        let (next, reward, dropped) = cartpole_step(&self.spec, &self.state, action);
        self.state = next;
        self.t += 1;
        Ok(EnvObservation {
            state: discretize(&self.state, &self.spec),
            reward,
            terminated: dropped || self.t >= self.spec.max_steps,
            truncated: !dropped && self.t >= self.spec.max_steps,
        })
    }

    fn set_horizon(&mut self, horizon: usize) {
        self.spec.max_steps = horizon;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn upright_pole_survives_one_step() {
        let spec = CartPoleSpec::default();
        let (next, reward, done) = cartpole_step(&spec, &[0.0; 4], 1);
        assert!(!done);
        assert_eq!(reward, 1.0);
        assert!(next[2].abs() < spec.theta_threshold());
    }

    #[test]
    fn falling_past_angle_bound_terminates() {
        let spec = CartPoleSpec::default();
        let at_bound = [0.0, 0.0, spec.theta_threshold(), 1.0];
        for action in 0..2 {
            let (_, reward, done) = cartpole_step(&spec, &at_bound, action);
            assert!(done);
            assert_eq!(reward, -1.0);
        }
    }

    #[test]
    fn constant_push_topples() {
        let spec = CartPoleSpec::default();
        let mut state = [0.0; 4];
        let mut fell_at = None;
        for t in 0..50 {
            let (next, _, done) = cartpole_step(&spec, &state, 0);
            state = next;
            if done {
                fell_at = Some(t);
                break;
            }
        }
        assert!(fell_at.is_some());
    }

    #[test]
    fn discretizer_is_total() {
        let spec = CartPoleSpec::default();
        assert_eq!(spec.n_states(), 162);
        // centre buckets: 1, 1, 3, 1
        assert_eq!(discretize(&[0.0; 4], &spec), ((3 + 1) * 6 + 3) * 3 + 1);
        assert_eq!(discretize(&[1e9, -1e9, 5.0, f64::INFINITY], &spec), ((2 * 3) * 6 + 5) * 3 + 2);
        for s in [[f64::NAN; 4], [f64::NEG_INFINITY; 4], [f64::MAX; 4]] {
            assert!(discretize(&s, &spec) < 162);
        }
    }

    #[test]
    fn reproducible_given_seed() {
        let run = || {
            let mut env = CartPole::new(CartPoleSpec::default(), 42).unwrap();
            let mut trace = vec![env.reset() as f64];
            for t in 0..200 {
                let obs = env.step(t % 3 % 2).unwrap();
                trace.extend(env.state());
                if obs.terminated {
                    trace.push(env.reset() as f64);
                }
            }
            trace
        };
        let (a, b) = (run(), run());
        assert_eq!(a.len(), b.len());
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
