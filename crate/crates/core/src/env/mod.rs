//! Ground-truth physics for cartpole swing-up and quadcopter trajectory
//! tracking, with perturbable parameters and additive control noise.
//!
//! Environments are value-semantic: `step` takes a state in and returns a
//! state out, so arbitrarily many rollouts can run concurrently with
//! independent seeded generators.

mod cartpole;
mod quad;
mod target;

pub use cartpole::{cartpole_energy, CartpoleParams};
pub use quad::QuadParams;
pub use target::{TargetKind, TargetTrajectory};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use thiserror::Error;

/// A trial with task cost at or below this is a success.
pub const FAILURE_COST: f64 = 100.0;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("non-finite state or control input")]
    NonFiniteInput,
    #[error("trajectory diverged")]
    Diverged,
    #[error("empty trajectory")]
    EmptyTrajectory,
    #[error("unknown environment parameter `{0}`")]
    UnknownParam(String),
}

pub type EnvResult<T> = Result<T, EnvError>;

/// Wraps an angle to [-pi, pi).
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut w = (a + std::f64::consts::PI).rem_euclid(two_pi);
    if w < 0.0 {
        w += two_pi;
    }
    w - std::f64::consts::PI
}

#[derive(Clone, Debug, Serialize)]
pub enum Env {
    Cartpole(CartpoleParams),
    Quad {
        params: QuadParams,
        target: TargetTrajectory,
    },
}

impl Env {
    pub fn cartpole(params: CartpoleParams) -> Self {
        Env::Cartpole(params)
    }

    pub fn quad(params: QuadParams, target: TargetTrajectory) -> Self {
        Env::Quad { params, target }
    }

    pub fn state_dim(&self) -> usize {
        match self {
            Env::Cartpole(_) => 4,
            Env::Quad { .. } => 12,
        }
    }

    pub fn control_dim(&self) -> usize {
        match self {
            Env::Cartpole(_) => 1,
            Env::Quad { .. } => 4,
        }
    }

    pub fn dt(&self) -> f64 {
        match self {
            Env::Cartpole(p) => p.dt,
            Env::Quad { params, .. } => params.dt,
        }
    }

    /// Per-channel actuator range.
    pub fn control_limits(&self) -> (f64, f64) {
        match self {
            Env::Cartpole(p) => (-p.force_limit, p.force_limit),
            Env::Quad { params, .. } => (0.0, params.thrust_limit),
        }
    }

    pub fn clamp_control(&self, u: &mut [f64]) {
        let (lo, hi) = self.control_limits();
        for v in u.iter_mut() {
            *v = v.clamp(lo, hi);
        }
    }

    /// Deterministic drift of the system at `(state, control)`.
    pub fn derivatives(&self, state: &[f64], control: &[f64]) -> EnvResult<Vec<f64>> {
        if !state.iter().chain(control).all(|v| v.is_finite()) {
            return Err(EnvError::NonFiniteInput);
        }
        debug_assert_eq!(state.len(), self.state_dim());
        debug_assert_eq!(control.len(), self.control_dim());
        Ok(match self {
            Env::Cartpole(p) => cartpole::derivatives(p, state, control).to_vec(),
            Env::Quad { params, .. } => quad::derivatives(params, state, control).to_vec(),
        })
    }

    /// One classic Runge-Kutta step of size `h` on the deterministic drift.
    /// The control is clamped to actuator limits and held over the step.
    pub fn rk4(&self, state: &[f64], control: &[f64], h: f64) -> EnvResult<Vec<f64>> {
        let mut u = control.to_vec();
        self.clamp_control(&mut u);
        let k1 = self.derivatives(state, &u)?;
        let mid1 = add_scaled(state, &k1, h / 2.0);
        let k2 = self.derivatives(&mid1, &u)?;
        let mid2 = add_scaled(state, &k2, h / 2.0);
        let k3 = self.derivatives(&mid2, &u)?;
        let end = add_scaled(state, &k3, h);
        let k4 = self.derivatives(&end, &u)?;
        let mut out = state.to_vec();
        for i in 0..out.len() {
            out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        Ok(out)
    }

    /// Advances the true system by `dt` with additive control noise
    /// `sigma * eps * sqrt(dt)`, one standard-normal draw per channel per
    /// step. Divergence is a signal, not a crash.
    pub fn step(&self, state: &[f64], control: &[f64], rng: &mut ChaCha8Rng) -> EnvResult<Vec<f64>> {
        let sigma = match self {
            Env::Cartpole(p) => p.control_noise,
            Env::Quad { params, .. } => params.control_noise,
        };
        let dt = self.dt();
        let mut u = control.to_vec();
        if sigma > 0.0 {
            for v in u.iter_mut() {
                let eps: f64 = rng.sample(StandardNormal);
                *v += sigma * eps * dt.sqrt();
            }
        }
        self.step_with(state, &u)
    }

    /// Advances the system by `dt` with the control exactly as given
    /// (after actuator clamping); used by planner rollouts, which inject
    /// their own perturbations.
    pub fn step_with(&self, state: &[f64], control: &[f64]) -> EnvResult<Vec<f64>> {
        let next = self.rk4(state, control, self.dt())?;
        if !next.iter().all(|v| v.is_finite()) {
            return Err(EnvError::Diverged);
        }
        if let Env::Quad { .. } = self {
            // Roll or pitch at the Euler singularity ends the trajectory.
            if next[6].abs() >= quad::ATTITUDE_LIMIT || next[7].abs() >= quad::ATTITUDE_LIMIT {
                return Err(EnvError::Diverged);
            }
        }
        Ok(next)
    }

    /// Episode score. Cartpole: total distance from the upright centered
    /// configuration over the second half of the trajectory. Quadcopter:
    /// mean distance to the nearest target waypoint.
    pub fn task_cost(&self, trajectory: &[Vec<f64>]) -> EnvResult<f64> {
        if trajectory.is_empty() {
            return Err(EnvError::EmptyTrajectory);
        }
        match self {
            Env::Cartpole(p) => {
                let half = trajectory.len() / 2;
                let mut total = 0.0;
                for s in &trajectory[half..] {
                    total += s[0].abs() + p.pole_length * wrap_angle(s[2] - std::f64::consts::PI).abs();
                }
                Ok(total)
            }
            Env::Quad { target, .. } => {
                let mut total = 0.0;
                for s in trajectory {
                    total += target.nearest_distance(&[s[0], s[1], s[2]]);
                }
                Ok(total / trajectory.len() as f64)
            }
        }
    }

    /// Draws an episode start state.
    ///
    /// Cartpole: cart position uniform on [-5, 5], pole angle uniform on
    /// [0, 2pi), zero velocities. Quadcopter: a uniformly chosen target
    /// waypoint with matching tangent velocity, position-perturbed when
    /// `init_pos_spread > 0`.
    pub fn sample_initial_state(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match self {
            Env::Cartpole(_) => {
                let x = rng.gen_range(-5.0..=5.0);
                let theta = rng.gen_range(0.0..2.0 * std::f64::consts::PI);
                vec![x, 0.0, theta, 0.0]
            }
            Env::Quad { params, target } => {
                let k = rng.gen_range(0..target.segment_count());
                let wp = target.waypoint(k);
                let tangent = target.tangent_velocity(k, params.dt);
                let mut p = wp;
                if params.init_pos_spread > 0.0 {
                    for v in p.iter_mut() {
                        *v += rng.gen_range(-params.init_pos_spread..=params.init_pos_spread);
                    }
                }
                let mut state = vec![0.0; 12];
                state[..3].copy_from_slice(&p);
                state[3..6].copy_from_slice(&tangent);
                state
            }
        }
    }

    /// Steady-state control: zero force (cartpole) or per-rotor hover
    /// thrust (quadcopter).
    pub fn neutral_control(&self) -> Vec<f64> {
        match self {
            Env::Cartpole(_) => vec![0.0],
            Env::Quad { params, .. } => {
                vec![params.mass * params.gravity / (4.0 * params.thrust_coeff); 4]
            }
        }
    }

    /// Overrides a named physical parameter; sweep grids address
    /// parameters this way.
    pub fn set_param(&mut self, name: &str, value: f64) -> EnvResult<()> {
        match self {
            Env::Cartpole(p) => match name {
                "cart_mass" => p.cart_mass = value,
                "pole_mass" => p.pole_mass = value,
                "pole_length" => p.pole_length = value,
                "rail_friction" => p.rail_friction = value,
                "control_noise" => p.control_noise = value,
                "force_limit" => p.force_limit = value,
                _ => return Err(EnvError::UnknownParam(name.to_string())),
            },
            Env::Quad { params, .. } => match name {
                "mass" => params.mass = value,
                "arm_length" => params.arm_length = value,
                "gravity" => params.gravity = value,
                "thrust_coeff" => params.thrust_coeff = value,
                "torque_coeff" => params.torque_coeff = value,
                "control_noise" => params.control_noise = value,
                "thrust_limit" => params.thrust_limit = value,
                "init_pos_spread" => params.init_pos_spread = value,
                _ => return Err(EnvError::UnknownParam(name.to_string())),
            },
        }
        Ok(())
    }
}

fn add_scaled(base: &[f64], delta: &[f64], factor: f64) -> Vec<f64> {
    base.iter()
        .zip(delta)
        .map(|(b, d)| b + d * factor)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn cartpole_env() -> Env {
        Env::cartpole(CartpoleParams::default())
    }

    #[test]
    fn wrap_angle_range() {
        assert!((wrap_angle(3.0 * std::f64::consts::PI).abs() - std::f64::consts::PI).abs() < 1e-12);
        assert!((wrap_angle(-std::f64::consts::PI).abs() - std::f64::consts::PI).abs() < 1e-12);
        assert!((wrap_angle(0.3) - 0.3).abs() < 1e-12);
        assert!((wrap_angle(0.3 + 4.0 * std::f64::consts::PI) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn cartpole_rest_is_equilibrium() {
        let mut p = CartpoleParams::default();
        p.rail_friction = 0.0;
        let env = Env::cartpole(p);
        let d = env.derivatives(&[0.0; 4], &[0.0]).unwrap();
        assert!(d.iter().all(|v| v.abs() < 1e-15), "{d:?}");
    }

    #[test]
    fn cartpole_upright_is_equilibrium() {
        let mut p = CartpoleParams::default();
        p.rail_friction = 0.0;
        let env = Env::cartpole(p);
        let d = env
            .derivatives(&[0.0, 0.0, std::f64::consts::PI, 0.0], &[0.0])
            .unwrap();
        assert!(d.iter().all(|v| v.abs() < 1e-12), "{d:?}");
    }

    #[test]
    fn quad_hover_is_equilibrium() {
        let env = Env::quad(QuadParams::default(), TargetTrajectory::circle(0.02, 15.0));
        let hover = env.neutral_control();
        let mut state = vec![0.0; 12];
        state[2] = 1.0;
        let d = env.derivatives(&state, &hover).unwrap();
        assert!(d.iter().all(|v| v.abs() < 1e-12), "{d:?}");
    }

    #[test]
    fn quad_hover_fixed_point_drift() {
        let env = Env::quad(QuadParams::default(), TargetTrajectory::circle(0.02, 15.0));
        let hover = env.neutral_control();
        let mut state = vec![0.0; 12];
        state[2] = 1.0;
        for _ in 0..50 {
            let next = env.step_with(&state, &hover).unwrap();
            let drift = (0..3)
                .map(|i| (next[i] - state[i]).abs())
                .fold(0.0f64, f64::max);
            assert!(drift < 1e-9, "position drift {drift}");
            state = next;
        }
    }

    #[test]
    fn non_finite_input_is_an_error() {
        let env = cartpole_env();
        assert!(matches!(
            env.derivatives(&[f64::NAN, 0.0, 0.0, 0.0], &[0.0]),
            Err(EnvError::NonFiniteInput)
        ));
    }

    #[test]
    fn noiseless_step_is_deterministic() {
        let mut p = CartpoleParams::default();
        p.control_noise = 0.0;
        let env = Env::cartpole(p);
        let state = [1.0, 0.2, 2.0, -0.1];
        let mut rng_a = ChaCha8Rng::seed_from_u64(1);
        let mut rng_b = ChaCha8Rng::seed_from_u64(999);
        let a = env.step(&state, &[3.0], &mut rng_a).unwrap();
        let b = env.step(&state, &[3.0], &mut rng_b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn seeded_steps_are_bit_identical() {
        let env = cartpole_env();
        let state = [0.5, 0.0, 1.0, 0.0];
        let mut rng_a = ChaCha8Rng::seed_from_u64(77);
        let mut rng_b = ChaCha8Rng::seed_from_u64(77);
        let a = env.step(&state, &[2.0], &mut rng_a).unwrap();
        let b = env.step(&state, &[2.0], &mut rng_b).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn energy_conservation_frictionless() {
        let mut p = CartpoleParams::default();
        p.rail_friction = 0.0;
        p.control_noise = 0.0;
        let env = Env::cartpole(p.clone());
        let start = vec![1.0, 0.02, 0.1, 0.02];
        let e0 = cartpole_energy(&p, &start);

        // Reference trajectory at dt = 1e-3 for one simulated second.
        let mut fine = start.clone();
        for _ in 0..1000 {
            fine = env.rk4(&fine, &[0.0], 1e-3).unwrap();
        }
        let e_ref = cartpole_energy(&p, &fine);
        assert!(
            (e_ref - e0).abs() / e0.abs().max(1.0) < 1e-9,
            "reference integration drifted"
        );

        // Coarse trajectory at the task step size.
        let mut coarse = start;
        for _ in 0..20 {
            coarse = env.step_with(&coarse, &[0.0]).unwrap();
        }
        let e_coarse = cartpole_energy(&p, &coarse);
        let drift = (e_coarse - e_ref).abs() / e_ref.abs().max(1.0);
        assert!(drift < 1e-6, "energy drift {drift}");
    }

    #[test]
    fn rk4_is_fourth_order() {
        let env = cartpole_env();
        let state = [0.3, 0.4, 1.2, -0.6];
        let u = [2.5];
        // High-resolution reference over one task step.
        let mut reference = state.to_vec();
        for _ in 0..1000 {
            reference = env.rk4(&reference, &u, 0.05 / 1000.0).unwrap();
        }
        let err_of = |substeps: usize| {
            let mut s = state.to_vec();
            for _ in 0..substeps {
                s = env.rk4(&s, &u, 0.05 / substeps as f64).unwrap();
            }
            s.iter()
                .zip(&reference)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max)
        };
        let ratio = err_of(1) / err_of(2);
        assert!(
            (8.0..40.0).contains(&ratio),
            "halving a sub-step changed error by {ratio}x, expected ~16x"
        );
    }

    #[test]
    fn cartpole_cost_zero_when_pinned_upright() {
        let env = cartpole_env();
        let upright = vec![0.0, 0.0, std::f64::consts::PI, 0.0];
        let traj = vec![upright; 101];
        assert_eq!(env.task_cost(&traj).unwrap(), 0.0);
    }

    #[test]
    fn quad_cost_zero_on_target() {
        let target = TargetTrajectory::circle(0.02, 15.0);
        let env = Env::quad(QuadParams::default(), target.clone());
        let traj: Vec<Vec<f64>> = (0..target.segment_count())
            .map(|k| {
                let wp = target.waypoint(k);
                let mut s = vec![0.0; 12];
                s[..3].copy_from_slice(&wp);
                s
            })
            .collect();
        assert!(env.task_cost(&traj).unwrap() < 1e-12);
    }

    #[test]
    fn empty_trajectory_is_an_error() {
        let env = cartpole_env();
        assert!(matches!(
            env.task_cost(&[]),
            Err(EnvError::EmptyTrajectory)
        ));
    }

    #[test]
    fn cartpole_initial_state_statistics() {
        let env = cartpole_env();
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let n = 10_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let s = env.sample_initial_state(&mut rng);
            assert!((-5.0..=5.0).contains(&s[0]));
            assert!((0.0..2.0 * std::f64::consts::PI).contains(&s[2]));
            assert_eq!(s[1], 0.0);
            assert_eq!(s[3], 0.0);
            sum += s[0];
        }
        // Uniform on [-5, 5]: stderr of the mean is (10/sqrt(12))/sqrt(n).
        let stderr = 10.0 / 12f64.sqrt() / (n as f64).sqrt();
        assert!(
            (sum / n as f64).abs() < 3.0 * stderr,
            "mean {} outside 3 standard errors",
            sum / n as f64
        );
    }

    #[test]
    fn quad_initial_state_lies_on_target() {
        let target = TargetTrajectory::figure_eight(0.02, 15.0);
        let env = Env::quad(QuadParams::default(), target.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = env.sample_initial_state(&mut rng);
        assert!(target.nearest_distance(&[s[0], s[1], s[2]]) < 1e-12);
    }

    #[test]
    fn reproducible_initial_draw() {
        let env = cartpole_env();
        let a = env.sample_initial_state(&mut ChaCha8Rng::seed_from_u64(9));
        let b = env.sample_initial_state(&mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn unknown_param_is_an_error() {
        let mut env = cartpole_env();
        assert!(matches!(
            env.set_param("mass", 1.0),
            Err(EnvError::UnknownParam(_))
        ));
        assert!(env.set_param("pole_length", 0.7).is_ok());
    }
}
