//! Sampling-based path-integral controller over the true environment
//! model, run receding-horizon with warm starts. Serves as the expert for
//! both tasks.
//!
//! The control-update arithmetic lives in [`path_integral_update`] and is
//! executed on an operation tape. The differentiable planner reuses the
//! exact same function mid-graph, so the two paths agree bit for bit on
//! identical inputs.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::autodiff::{AdResult, Tape, Tensor};
use crate::env::{wrap_angle, Env, TargetTrajectory};

#[derive(Clone, Debug, Serialize)]
pub struct MppiConfig {
    /// Sampled rollouts per update (K).
    pub rollouts: usize,
    /// Planning horizon in steps (H).
    pub horizon: usize,
    /// Softmax temperature (lambda).
    pub temperature: f64,
    /// Exploration scale (nu >= 1); nu = 1 removes the quadratic noise
    /// penalty from the adjusted running cost.
    pub exploration: f64,
    /// Sampling perturbation stddev per control channel. Distinct from the
    /// environment's disturbance noise.
    pub sample_std: f64,
    /// Diagonal of the control-cost matrix R, one entry per channel.
    pub control_cost: Vec<f64>,
    /// Optimization passes per planning call.
    pub updates_per_step: usize,
}

impl MppiConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.rollouts == 0 {
            return Err("rollouts must be >= 1".into());
        }
        if self.horizon == 0 {
            return Err("horizon must be >= 1".into());
        }
        if self.temperature <= 0.0 {
            return Err("temperature must be > 0".into());
        }
        if self.exploration < 1.0 {
            return Err("exploration must be >= 1".into());
        }
        if self.sample_std < 0.0 {
            return Err("sample_std must be >= 0".into());
        }
        if self.control_cost.iter().any(|r| *r < 0.0) {
            return Err("control_cost entries must be >= 0".into());
        }
        if self.updates_per_step == 0 {
            return Err("updates_per_step must be >= 1".into());
        }
        Ok(())
    }
}

/// A horizon of control vectors, row `t` holding the controls for step `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlSeq {
    horizon: usize,
    dim: usize,
    data: Vec<f64>,
}

impl ControlSeq {
    pub fn zeros(horizon: usize, dim: usize) -> Self {
        ControlSeq {
            horizon,
            dim,
            data: vec![0.0; horizon * dim],
        }
    }

    pub fn from_flat(horizon: usize, dim: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), horizon * dim);
        ControlSeq { horizon, dim, data }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn first(&self) -> &[f64] {
        self.row(0)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn clamp(&mut self, lo: f64, hi: f64) {
        for v in self.data.iter_mut() {
            *v = v.clamp(lo, hi);
        }
    }
}

/// Shift-and-pad warm start: `[u^2..u^H, u^H]`.
pub fn shift_warm_start(u: &ControlSeq) -> ControlSeq {
    let (h, m) = (u.horizon, u.dim);
    let mut data = Vec::with_capacity(h * m);
    for t in 1..h {
        data.extend_from_slice(u.row(t));
    }
    data.extend_from_slice(u.row(h - 1));
    ControlSeq::from_flat(h, m, data)
}

/// K sampled rollouts: the standard-normal noise, the visited states, and
/// the control-cost adjusted trajectory costs. Diverged rollouts carry an
/// infinite cost.
pub struct TrajectoryBatch {
    pub rollouts: usize,
    pub horizon: usize,
    pub control_dim: usize,
    pub state_dim: usize,
    /// [K x H x m], row-major.
    pub noise: Vec<f64>,
    /// [K x (H+1) x n], row-major; row 0 is the start state.
    pub states: Vec<f64>,
    /// [K]; +inf for diverged rollouts.
    pub costs: Vec<f64>,
}

impl TrajectoryBatch {
    pub fn noise_slice(&self, k: usize) -> &[f64] {
        let len = self.horizon * self.control_dim;
        &self.noise[k * len..(k + 1) * len]
    }

    pub fn state(&self, k: usize, t: usize) -> &[f64] {
        let stride = (self.horizon + 1) * self.state_dim;
        let base = k * stride + t * self.state_dim;
        &self.states[base..base + self.state_dim]
    }
}

/// Per-step state cost q(x, t) for the expert planner. The paper leaves
/// the expert's running cost unspecified; these are the project defaults.
#[derive(Clone, Debug, Serialize)]
pub enum RunningCost {
    /// Quadratic in (x, wrap(theta - pi), xdot, thetadot).
    CartpoleSwingup { weights: [f64; 4] },
    /// Quadratic distance to the time-indexed target waypoint plus a body
    /// rate penalty.
    QuadTracking {
        target: TargetTrajectory,
        pos_weight: f64,
        rate_weight: f64,
    },
}

impl RunningCost {
    pub fn state_cost(&self, x: &[f64], step: usize) -> f64 {
        match self {
            RunningCost::CartpoleSwingup { weights } => {
                let dtheta = wrap_angle(x[2] - std::f64::consts::PI);
                weights[0] * x[0] * x[0]
                    + weights[1] * dtheta * dtheta
                    + weights[2] * x[1] * x[1]
                    + weights[3] * x[3] * x[3]
            }
            RunningCost::QuadTracking {
                target,
                pos_weight,
                rate_weight,
            } => {
                let wp = target.waypoint_at_step(step);
                let dp: f64 = (0..3).map(|i| (x[i] - wp[i]).powi(2)).sum();
                let rates: f64 = (9..12).map(|i| x[i] * x[i]).sum();
                pos_weight * dp + rate_weight * rates
            }
        }
    }
}

/// Rolls out K perturbed control sequences through the model dynamics and
/// accumulates the control-cost adjusted running cost
///
///   (q(x) + u'Ru/2) dt + lambda u'eps sqrt(dt)
///   + lambda (1 - 1/nu)/2 eps'eps
///
/// per step. With `sample_std == 0` the sampler is deterministic and the
/// noise tensor is zero.
pub fn sample_rollouts(
    model: &Env,
    cost: &RunningCost,
    x: &[f64],
    u: &ControlSeq,
    cfg: &MppiConfig,
    start_step: usize,
    rng: &mut ChaCha8Rng,
) -> TrajectoryBatch {
    let (kk, h, m, n) = (cfg.rollouts, cfg.horizon, u.dim(), x.len());
    let dt = model.dt();
    let sqrt_dt = dt.sqrt();
    let lambda = cfg.temperature;
    let quad_noise_coeff = lambda * (1.0 - 1.0 / cfg.exploration) / 2.0;

    let mut noise = vec![0.0; kk * h * m];
    if cfg.sample_std > 0.0 {
        for v in noise.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
    }

    let mut states = vec![0.0; kk * (h + 1) * n];
    let mut costs = vec![0.0; kk];

    for k in 0..kk {
        let eps_k = &noise[k * h * m..(k + 1) * h * m];
        let state_base = k * (h + 1) * n;
        states[state_base..state_base + n].copy_from_slice(x);

        let mut cur = x.to_vec();
        let mut total = 0.0;
        let mut diverged = false;
        for j in 0..h {
            let u_j = u.row(j);
            let eps_j = &eps_k[j * m..(j + 1) * m];
            let perturbed: Vec<f64> = u_j
                .iter()
                .zip(eps_j)
                .map(|(uv, ev)| uv + cfg.sample_std * ev)
                .collect();
            match model.step_with(&cur, &perturbed) {
                Ok(next) => cur = next,
                Err(_) => {
                    diverged = true;
                }
            }
            let row = &mut states[state_base + (j + 1) * n..state_base + (j + 2) * n];
            row.copy_from_slice(&cur);
            if diverged {
                break;
            }

            let q = cost.state_cost(&cur, start_step + j + 1);
            let control_quad: f64 = u_j
                .iter()
                .zip(&cfg.control_cost)
                .map(|(uv, r)| 0.5 * r * uv * uv)
                .sum();
            let cross: f64 = u_j.iter().zip(eps_j).map(|(uv, ev)| uv * ev).sum();
            let eps_sq: f64 = eps_j.iter().map(|e| e * e).sum();
            total += (q + control_quad) * dt + lambda * cross * sqrt_dt + quad_noise_coeff * eps_sq;
        }
        if diverged || !total.is_finite() {
            costs[k] = f64::INFINITY;
            // Remaining rows keep the last valid state; the rollout has
            // zero weight either way.
            let last = states[state_base..state_base + (h + 1) * n]
                .chunks(n)
                .rposition(|row| row.iter().all(|v| v.is_finite()))
                .unwrap_or(0);
            let filler = states[state_base + last * n..state_base + (last + 1) * n].to_vec();
            for t in (last + 1)..=h {
                states[state_base + t * n..state_base + (t + 1) * n].copy_from_slice(&filler);
            }
        } else {
            costs[k] = total;
        }
    }

    TrajectoryBatch {
        rollouts: kk,
        horizon: h,
        control_dim: m,
        state_dim: n,
        noise,
        states,
        costs,
    }
}

/// Recomputes one rollout's adjusted cost from its stored states and
/// noise; test oracle for the batch bookkeeping.
pub fn recompute_cost(
    batch: &TrajectoryBatch,
    k: usize,
    cost: &RunningCost,
    u: &ControlSeq,
    cfg: &MppiConfig,
    dt: f64,
    start_step: usize,
) -> f64 {
    let m = batch.control_dim;
    let lambda = cfg.temperature;
    let quad_noise_coeff = lambda * (1.0 - 1.0 / cfg.exploration) / 2.0;
    let eps_k = batch.noise_slice(k);
    let mut total = 0.0;
    for j in 0..batch.horizon {
        let u_j = u.row(j);
        let eps_j = &eps_k[j * m..(j + 1) * m];
        let q = cost.state_cost(batch.state(k, j + 1), start_step + j + 1);
        let control_quad: f64 = u_j
            .iter()
            .zip(&cfg.control_cost)
            .map(|(uv, r)| 0.5 * r * uv * uv)
            .sum();
        let cross: f64 = u_j.iter().zip(eps_j).map(|(uv, ev)| uv * ev).sum();
        let eps_sq: f64 = eps_j.iter().map(|e| e * e).sum();
        total +=
            (q + control_quad) * dt + lambda * cross * dt.sqrt() + quad_noise_coeff * eps_sq;
    }
    total
}

/// The closed-form control update: softmax weights over negated costs
/// (stabilized by subtracting the minimum cost) applied to the noise,
/// scaled by 1/sqrt(dt), added to the baseline.
///
/// `u` is a flat [H*m] tensor on the tape; `noise[k]` is an [H*m x 1]
/// matrix on the tape; `costs[k]` a scalar on the tape. All inputs must
/// be finite; callers drop infinite-cost samples first (their softmax
/// weight is exactly zero).
pub fn path_integral_update(
    tape: &mut Tape,
    u: &Tensor,
    noise: &[Tensor],
    costs: &[Tensor],
    lambda: f64,
    dt: f64,
) -> AdResult<Tensor> {
    assert_eq!(noise.len(), costs.len());
    assert!(!costs.is_empty());
    let hm = u.len();

    let min_cost = costs
        .iter()
        .map(|c| c.item())
        .fold(f64::INFINITY, f64::min);
    let neg_min = tape.constant(&Tensor::scalar(-min_cost))?;
    let zeros = tape.constant(&Tensor::zeros(vec![hm]))?;

    let mut exps = Vec::with_capacity(costs.len());
    for c in costs {
        let shifted = tape.add(c, &neg_min)?;
        let logit = tape.scale(&shifted, -1.0 / lambda)?;
        exps.push(tape.exp(&logit)?);
    }

    let mut denom = exps[0].clone();
    for e in &exps[1..] {
        denom = tape.add(&denom, e)?;
    }

    let mut weighted: Option<Tensor> = None;
    for (e, eps) in exps.iter().zip(noise) {
        let w = tape.div(e, &denom)?;
        let contrib = tape.affine(eps, &w, &zeros)?;
        weighted = Some(match weighted {
            Some(acc) => tape.add(&acc, &contrib)?,
            None => contrib,
        });
    }
    let delta = tape.scale(&weighted.expect("at least one sample"), 1.0 / dt.sqrt())?;
    tape.add(u, &delta)
}

/// Tape nodes [`path_integral_update`] records for `k` samples, excluding
/// the caller-registered inputs.
pub fn update_node_count(k: usize) -> usize {
    6 * k + 2
}

/// Value-level wrapper around [`path_integral_update`] for the expert:
/// drops infinite-cost samples (zero weight), clamps the result to the
/// control limits, and reports whether every sample had diverged.
pub fn mppi_update(
    u: &ControlSeq,
    batch: &TrajectoryBatch,
    cfg: &MppiConfig,
    dt: f64,
    limits: (f64, f64),
) -> (ControlSeq, bool) {
    let finite: Vec<usize> = (0..batch.rollouts)
        .filter(|&k| batch.costs[k].is_finite())
        .collect();
    if finite.is_empty() {
        return (u.clone(), true);
    }

    let (h, m) = (u.horizon(), u.dim());
    let mut tape = Tape::new();
    let u_node = tape
        .constant(&Tensor::vector(u.as_flat().to_vec()))
        .expect("finite warm start");
    let mut noise_nodes = Vec::with_capacity(finite.len());
    let mut cost_nodes = Vec::with_capacity(finite.len());
    for &k in &finite {
        let eps = Tensor::matrix(h * m, 1, batch.noise_slice(k).to_vec());
        noise_nodes.push(tape.constant(&eps).expect("finite noise"));
        cost_nodes.push(
            tape.constant(&Tensor::scalar(batch.costs[k]))
                .expect("finite cost"),
        );
    }
    let updated = path_integral_update(
        &mut tape,
        &u_node,
        &noise_nodes,
        &cost_nodes,
        cfg.temperature,
        dt,
    )
    .expect("update arithmetic on finite inputs");

    let mut out = ControlSeq::from_flat(h, m, updated.data().to_vec());
    out.clamp(limits.0, limits.1);
    (out, false)
}

/// Softmax weights the update applies, for inspection in tests.
pub fn softmax_weights(costs: &[f64], lambda: f64) -> Vec<f64> {
    let min = costs.iter().cloned().fold(f64::INFINITY, f64::min);
    let exps: Vec<f64> = costs.iter().map(|c| (-(c - min) / lambda).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.iter().map(|e| e / total).collect()
}

/// Receding-horizon path-integral expert. Owns its model (kept at the
/// training parameters even when the evaluated system is perturbed) and
/// its own warm-start chain.
#[derive(Clone)]
pub struct MppiExpert {
    pub cfg: MppiConfig,
    pub model: Env,
    pub cost: RunningCost,
    warm: ControlSeq,
    step_index: usize,
}

impl MppiExpert {
    pub fn new(cfg: MppiConfig, model: Env, cost: RunningCost) -> Self {
        let warm = ControlSeq::zeros(cfg.horizon, model.control_dim());
        MppiExpert {
            cfg,
            model,
            cost,
            warm,
            step_index: 0,
        }
    }

    /// Starts a fresh episode at curve phase `phase` (0 for cartpole).
    pub fn reset(&mut self, phase: usize) {
        self.warm = ControlSeq::zeros(self.cfg.horizon, self.model.control_dim());
        self.step_index = phase;
    }

    pub fn warm_start(&self) -> &ControlSeq {
        &self.warm
    }

    /// Plans a full control sequence from `x`, warm-started with the shift
    /// of the previous output, and advances the internal chain.
    pub fn plan(&mut self, x: &[f64], rng: &mut ChaCha8Rng) -> ControlSeq {
        let mut u = self.warm.clone();
        for _ in 0..self.cfg.updates_per_step {
            let batch = sample_rollouts(
                &self.model,
                &self.cost,
                x,
                &u,
                &self.cfg,
                self.step_index,
                rng,
            );
            let (updated, _all_diverged) = mppi_update(
                &u,
                &batch,
                &self.cfg,
                self.model.dt(),
                self.model.control_limits(),
            );
            u = updated;
        }
        self.warm = shift_warm_start(&u);
        self.step_index += 1;
        u
    }
}
