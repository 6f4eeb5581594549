//! Differentiable path-integral planner: an abstract-dynamics RNN samples
//! K hidden-state trajectories, a cost network scores them, and the same
//! control update the sampling expert uses produces the output sequence —
//! all recorded on one tape so imitation loss trains everything
//! end-to-end.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::autodiff::{AdResult, Tape, Tensor};
use crate::derive_seed;
use crate::mppi::{path_integral_update, update_node_count, ControlSeq};
use crate::policy::{PolicyKind, PolicyParams};
use crate::{Error, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PiNetConfig {
    /// Abstract rollouts per update (K). Train small, evaluate large.
    pub rollouts: usize,
    /// Horizon steps (H).
    pub horizon: usize,
    /// Softmax temperature (lambda); fixed, not learned.
    pub temperature: f64,
    /// Exploration constant (nu >= 1). The learned cost network absorbs
    /// the noise terms it governs, so it does not enter the forward pass;
    /// kept as configuration for parity with the sampling expert.
    pub exploration: f64,
    /// Planner iterations per forward pass (U).
    pub iterations: usize,
    /// Abstract hidden dimension; must be >= the state dimension for
    /// zero-augmentation.
    pub hidden: usize,
    /// Cost-network hidden width.
    pub cost_hidden: usize,
    /// Training-memory ceiling for config validation, in MiB.
    pub memory_budget_mb: usize,
}

impl Default for PiNetConfig {
    fn default() -> Self {
        PiNetConfig {
            rollouts: 100,
            horizon: 20,
            temperature: 1.0,
            exploration: 1.5,
            iterations: 1,
            hidden: 64,
            cost_hidden: 64,
            memory_budget_mb: 4096,
        }
    }
}

impl PiNetConfig {
    pub fn validate(&self, state_dim: usize) -> Result<()> {
        if self.rollouts == 0 || self.horizon == 0 || self.iterations == 0 {
            return Err(Error::Config(
                "planner rollouts, horizon and iterations must be >= 1".into(),
            ));
        }
        if self.temperature <= 0.0 {
            return Err(Error::Config("planner temperature must be > 0".into()));
        }
        if self.exploration < 1.0 {
            return Err(Error::Config("planner exploration must be >= 1".into()));
        }
        if self.hidden < state_dim {
            return Err(Error::Config(format!(
                "abstract hidden dim {} is smaller than the state dim {}; zero-augmentation needs hidden >= state",
                self.hidden, state_dim
            )));
        }
        Ok(())
    }

    /// Validates a training configuration against the memory budget. The
    /// tape holds U * K * H network evaluations per example; a whole
    /// minibatch of such tapes must fit the budget. Iterating the planner
    /// U times multiplies storage U-fold, which is exactly what keeping
    /// U = 1 during training avoids.
    pub fn validate_for_training(
        &self,
        state_dim: usize,
        control_dim: usize,
        batch_size: usize,
    ) -> Result<()> {
        self.validate(state_dim)?;
        let bytes = self.training_memory_bytes(control_dim, batch_size);
        let budget = self.memory_budget_mb as u64 * 1024 * 1024;
        if bytes > budget {
            return Err(Error::Config(format!(
                "planner training config needs ~{} MiB ({} iterations x {} rollouts x {} steps x batch {}), over the {} MiB budget; reduce iterations (U=1 trains fine) or rollouts",
                bytes / (1024 * 1024),
                self.iterations,
                self.rollouts,
                self.horizon,
                batch_size,
                self.memory_budget_mb
            )));
        }
        Ok(())
    }

    /// Estimated bytes of tape storage for one training minibatch: node
    /// count times per-node value + gradient buffers and bookkeeping.
    pub fn training_memory_bytes(&self, control_dim: usize, batch_size: usize) -> u64 {
        let nodes = self.analytic_node_count(control_dim) as u64;
        let per_node = (self.hidden as u64) * 8 * 2 + 96;
        nodes * per_node * batch_size as u64
    }

    /// Exact tape node count of one forward pass, including the seven
    /// parameter-leaf registrations. Grows as U * K * H.
    pub fn analytic_node_count(&self, control_dim: usize) -> usize {
        let (k, h, u) = (self.rollouts, self.horizon, self.iterations);
        let per_iteration =
            // warm slices, per-rollout noise registration, the recurrence
            // and cost evaluations, the per-rollout cost chain, and the
            // control update.
            h + k * (2 + 10 * h + (h - 1)) + update_node_count(k);
        7 + 3 + u * per_iteration
    }
}

/// Zero-augmented abstract start state `[x || 0]`.
pub fn init_hidden(x: &[f64], hidden: usize) -> Result<Tensor> {
    if x.len() > hidden {
        return Err(Error::Config(format!(
            "state dim {} exceeds abstract hidden dim {hidden}",
            x.len()
        )));
    }
    let mut data = vec![0.0; hidden];
    data[..x.len()].copy_from_slice(x);
    Ok(Tensor::vector(data))
}

/// On-tape handles produced by the dynamics module for one planner
/// iteration.
pub struct AbstractRollouts {
    /// [K][H] hidden states.
    pub hidden: Vec<Vec<Tensor>>,
    /// [K][H] perturbed controls.
    pub perturbed: Vec<Vec<Tensor>>,
    /// [K] noise as [H*m x 1] constants, the update module's layout.
    pub noise_mats: Vec<Tensor>,
    /// [K] noise as flat constants, for gradient bookkeeping checks.
    pub noise_vecs: Vec<Tensor>,
}

/// Runs the abstract-dynamics RNN over K noise sequences sharing one
/// start state. `u` is the flat [H*m] baseline on the tape; `noise` holds
/// K*H*m standard-normal draws treated as constants.
pub fn sample_abstract_rollouts(
    tape: &mut Tape,
    layers: &[Tensor],
    h0: &Tensor,
    u: &Tensor,
    noise: &[f64],
    rollouts: usize,
    horizon: usize,
    control_dim: usize,
) -> AdResult<AbstractRollouts> {
    let (wh, wu, b) = (&layers[0], &layers[1], &layers[2]);
    let zeros_h = tape.constant(&Tensor::zeros(vec![b.len()]))?;

    let u_slices: Vec<Tensor> = (0..horizon)
        .map(|t| tape.slice(u, t * control_dim, control_dim))
        .collect::<AdResult<_>>()?;

    let mut out = AbstractRollouts {
        hidden: Vec::with_capacity(rollouts),
        perturbed: Vec::with_capacity(rollouts),
        noise_mats: Vec::with_capacity(rollouts),
        noise_vecs: Vec::with_capacity(rollouts),
    };
    let stride = horizon * control_dim;
    for k in 0..rollouts {
        let eps_data = noise[k * stride..(k + 1) * stride].to_vec();
        let eps_vec = tape.constant(&Tensor::vector(eps_data.clone()))?;
        let eps_mat = tape.constant(&Tensor::matrix(stride, 1, eps_data))?;

        let mut h = h0.clone();
        let mut hidden_k = Vec::with_capacity(horizon);
        let mut perturbed_k = Vec::with_capacity(horizon);
        for t in 0..horizon {
            let eps_t = tape.slice(&eps_vec, t * control_dim, control_dim)?;
            let u_pert = tape.add(&u_slices[t], &eps_t)?;
            let from_u = tape.affine(wu, &u_pert, &zeros_h)?;
            let from_h = tape.affine(wh, &h, b)?;
            let pre = tape.add(&from_u, &from_h)?;
            h = tape.tanh(&pre)?;
            hidden_k.push(h.clone());
            perturbed_k.push(u_pert);
        }
        out.hidden.push(hidden_k);
        out.perturbed.push(perturbed_k);
        out.noise_mats.push(eps_mat);
        out.noise_vecs.push(eps_vec);
    }
    Ok(out)
}

/// Scores each abstract trajectory: the cost network consumes
/// [hidden || perturbed control] per step, summed over the horizon.
pub fn cost_trajectories(
    tape: &mut Tape,
    layers: &[Tensor],
    rollouts: &AbstractRollouts,
) -> AdResult<Vec<Tensor>> {
    let (cw1, cb1, cw2, cb2) = (&layers[3], &layers[4], &layers[5], &layers[6]);
    let mut scores = Vec::with_capacity(rollouts.hidden.len());
    for (hidden_k, perturbed_k) in rollouts.hidden.iter().zip(&rollouts.perturbed) {
        let mut total: Option<Tensor> = None;
        for (h, u_pert) in hidden_k.iter().zip(perturbed_k) {
            let z = tape.concat(h, u_pert)?;
            let a = tape.affine(cw1, &z, cb1)?;
            let act = tape.tanh(&a)?;
            let c = tape.affine(cw2, &act, cb2)?;
            total = Some(match total {
                Some(acc) => tape.add(&acc, &c)?,
                None => c,
            });
        }
        scores.push(total.expect("horizon >= 1"));
    }
    Ok(scores)
}

/// The planner's control update: the same arithmetic as the sampling
/// expert's, executed mid-graph so gradients flow through the scores and
/// the baseline.
pub fn control_update(
    tape: &mut Tape,
    u: &Tensor,
    noise_mats: &[Tensor],
    scores: &[Tensor],
    temperature: f64,
    dt: f64,
) -> AdResult<Tensor> {
    path_integral_update(tape, u, noise_mats, scores, temperature, dt)
}

/// Result of an on-tape planner pass.
pub struct PiNetTrace {
    /// Final control sequence, flat [H*m], unclamped.
    pub output: Tensor,
    /// Per-iteration trajectory scores (values).
    pub scores: Vec<Vec<f64>>,
    /// Per-iteration noise constants, flat form.
    pub noise_vecs: Vec<Vec<Tensor>>,
}

/// U planner iterations on one tape, each drawing its noise from `noise`
/// (one [K*H*m] block per iteration) and feeding its output into the next
/// as the new baseline.
pub fn pinet_forward_on_tape(
    tape: &mut Tape,
    layers: &[Tensor],
    cfg: &PiNetConfig,
    x: &[f64],
    warm: &ControlSeq,
    noise: &[Vec<f64>],
    dt: f64,
) -> AdResult<PiNetTrace> {
    assert_eq!(noise.len(), cfg.iterations);
    let h0 = tape.constant(&init_hidden(x, cfg.hidden).expect("validated config"))?;
    let mut u = tape.constant(&Tensor::vector(warm.as_flat().to_vec()))?;
    let mut trace = PiNetTrace {
        output: u.clone(),
        scores: Vec::with_capacity(cfg.iterations),
        noise_vecs: Vec::with_capacity(cfg.iterations),
    };
    for eps in noise {
        let rollouts = sample_abstract_rollouts(
            tape,
            layers,
            &h0,
            &u,
            eps,
            cfg.rollouts,
            cfg.horizon,
            warm.dim(),
        )?;
        let scores = cost_trajectories(tape, layers, &rollouts)?;
        u = control_update(
            tape,
            &u,
            &rollouts.noise_mats,
            &scores,
            cfg.temperature,
            dt,
        )?;
        trace.scores.push(scores.iter().map(|s| s.item()).collect());
        trace.noise_vecs.push(rollouts.noise_vecs);
    }
    trace.output = u;
    Ok(trace)
}

/// Fresh per-rollout noise: rollout k of iteration i draws from its own
/// derived stream, so enlarging K leaves earlier rollouts' samples
/// untouched.
pub fn draw_noise(cfg: &PiNetConfig, control_dim: usize, base_seed: u64) -> Vec<Vec<f64>> {
    (0..cfg.iterations)
        .map(|i| {
            let mut block = Vec::with_capacity(cfg.rollouts * cfg.horizon * control_dim);
            for k in 0..cfg.rollouts {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(derive_seed(base_seed, &[i as u64, k as u64]));
                for _ in 0..cfg.horizon * control_dim {
                    block.push(rng.sample::<f64, _>(StandardNormal));
                }
            }
            block
        })
        .collect()
}

use rand::SeedableRng;

/// Value-level planning call: draws noise from the generator, runs the
/// planner on a throwaway tape, clamps at emission.
pub fn pinet_plan(
    params: &PolicyParams,
    cfg: &PiNetConfig,
    x: &[f64],
    warm: &ControlSeq,
    dt: f64,
    limits: (f64, f64),
    rng: &mut ChaCha8Rng,
) -> Result<ControlSeq> {
    debug_assert_eq!(params.kind, PolicyKind::PiNet);
    let base_seed: u64 = rng.gen();
    let noise = draw_noise(cfg, warm.dim(), base_seed);
    let mut tape = Tape::new();
    let layers: Vec<Tensor> = params
        .layers
        .iter()
        .map(|l| tape.constant(l))
        .collect::<AdResult<_>>()?;
    let trace = pinet_forward_on_tape(&mut tape, &layers, cfg, x, warm, &noise, dt)?;
    let mut seq = ControlSeq::from_flat(warm.horizon(), warm.dim(), trace.output.data().to_vec());
    seq.clamp(limits.0, limits.1);
    Ok(seq)
}

/// Mean squared error between a predicted and an expert control sequence.
pub fn pinet_loss(predicted: &ControlSeq, expert: &ControlSeq) -> f64 {
    let n = predicted.as_flat().len();
    assert_eq!(n, expert.as_flat().len());
    predicted
        .as_flat()
        .iter()
        .zip(expert.as_flat())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n as f64
}

/// On-tape mean squared error against a fixed target.
pub fn mse_on_tape(tape: &mut Tape, pred: &Tensor, target: &[f64]) -> AdResult<Tensor> {
    let t = tape.constant(&Tensor::vector(target.to_vec()))?;
    let neg = tape.neg(&t)?;
    let diff = tape.add(pred, &neg)?;
    let sq = tape.mul(&diff, &diff)?;
    let s = tape.sum(&sq)?;
    tape.scale(&s, 1.0 / target.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::grad_check_multi;
    use crate::policy::PolicyMeta;

    fn tiny_cfg() -> PiNetConfig {
        PiNetConfig {
            rollouts: 4,
            horizon: 3,
            temperature: 1.0,
            exploration: 1.5,
            iterations: 1,
            hidden: 8,
            cost_hidden: 8,
            memory_budget_mb: 4096,
        }
    }

    fn tiny_params(seed: u64) -> PolicyParams {
        let meta = PolicyMeta {
            state_dim: 4,
            control_dim: 1,
            horizon: 3,
            hidden: 8,
            cost_hidden: 8,
        };
        PolicyParams::init(PolicyKind::PiNet, meta, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    #[test]
    fn init_hidden_zero_pads() {
        let h = init_hidden(&[1.0, 2.0, 3.0, 4.0], 8).unwrap();
        assert_eq!(h.data(), &[1.0, 2.0, 3.0, 4.0, 0.0, 0.0, 0.0, 0.0]);
        let z = init_hidden(&[0.0; 4], 8).unwrap();
        assert!(z.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn init_hidden_rejects_wide_states() {
        assert!(init_hidden(&[0.0; 9], 8).is_err());
    }

    #[test]
    fn zero_noise_makes_identical_trajectories() {
        let params = tiny_params(1);
        let cfg = tiny_cfg();
        let mut tape = Tape::new();
        let layers: Vec<Tensor> = params
            .layers
            .iter()
            .map(|l| tape.constant(l).unwrap())
            .collect();
        let h0 = tape
            .constant(&init_hidden(&[0.1, 0.2, 0.3, 0.4], 8).unwrap())
            .unwrap();
        let u = tape
            .constant(&Tensor::vector(vec![0.5, -0.5, 0.2]))
            .unwrap();
        let noise = vec![0.0; 4 * 3];
        let rollouts =
            sample_abstract_rollouts(&mut tape, &layers, &h0, &u, &noise, 4, 3, 1).unwrap();
        for k in 1..4 {
            for t in 0..3 {
                assert_eq!(
                    rollouts.hidden[0][t].data(),
                    rollouts.hidden[k][t].data()
                );
            }
        }
    }

    #[test]
    fn zero_weights_give_tanh_bias_trajectory() {
        let meta = PolicyMeta {
            state_dim: 4,
            control_dim: 1,
            horizon: 3,
            hidden: 8,
            cost_hidden: 8,
        };
        let mut params = PolicyParams::zeros(PolicyKind::PiNet, meta);
        params.layers[2] = Tensor::vector(vec![0.3; 8]);
        let mut tape = Tape::new();
        let layers: Vec<Tensor> = params
            .layers
            .iter()
            .map(|l| tape.constant(l).unwrap())
            .collect();
        let h0 = tape
            .constant(&init_hidden(&[1.0, -1.0, 0.5, 0.2], 8).unwrap())
            .unwrap();
        let u = tape.constant(&Tensor::vector(vec![0.1, 0.2, 0.3])).unwrap();
        let noise: Vec<f64> = (0..3).map(|i| i as f64 * 0.1).collect();
        let rollouts =
            sample_abstract_rollouts(&mut tape, &layers, &h0, &u, &noise, 1, 3, 1).unwrap();
        let expected = 0.3f64.tanh();
        for t in 0..3 {
            for v in rollouts.hidden[0][t].data() {
                assert!((v - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn zero_cost_network_scores_h_times_bias() {
        let meta = PolicyMeta {
            state_dim: 4,
            control_dim: 1,
            horizon: 3,
            hidden: 8,
            cost_hidden: 8,
        };
        let mut params = PolicyParams::zeros(PolicyKind::PiNet, meta);
        params.layers[6] = Tensor::vector(vec![0.7]);
        let cfg = tiny_cfg();
        let noise = draw_noise(&cfg, 1, 99);
        let mut tape = Tape::new();
        let layers: Vec<Tensor> = params
            .layers
            .iter()
            .map(|l| tape.constant(l).unwrap())
            .collect();
        let warm = ControlSeq::zeros(3, 1);
        let trace = pinet_forward_on_tape(
            &mut tape,
            &layers,
            &cfg,
            &[0.0; 4],
            &warm,
            &noise,
            0.05,
        )
        .unwrap();
        for s in &trace.scores[0] {
            assert!((s - 3.0 * 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn forward_is_deterministic_for_fixed_noise() {
        let params = tiny_params(2);
        let cfg = tiny_cfg();
        let warm = ControlSeq::zeros(3, 1);
        let noise = draw_noise(&cfg, 1, 7);
        let run = || {
            let mut tape = Tape::new();
            let layers: Vec<Tensor> = params
                .layers
                .iter()
                .map(|l| tape.constant(l).unwrap())
                .collect();
            pinet_forward_on_tape(
                &mut tape,
                &layers,
                &cfg,
                &[0.3, 0.1, -0.2, 0.5],
                &warm,
                &noise,
                0.05,
            )
            .unwrap()
            .output
            .data()
            .to_vec()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn two_iterations_compose_single_passes() {
        let params = tiny_params(3);
        let mut cfg2 = tiny_cfg();
        cfg2.iterations = 2;
        let warm = ControlSeq::zeros(3, 1);
        let noise = draw_noise(&cfg2, 1, 31);
        let x = [0.3, 0.1, -0.2, 0.5];

        let mut tape = Tape::new();
        let layers: Vec<Tensor> = params
            .layers
            .iter()
            .map(|l| tape.constant(l).unwrap())
            .collect();
        let two = pinet_forward_on_tape(&mut tape, &layers, &cfg2, &x, &warm, &noise, 0.05)
            .unwrap()
            .output
            .data()
            .to_vec();

        // Same two blocks applied as two single-iteration passes.
        let mut cfg1 = tiny_cfg();
        cfg1.iterations = 1;
        let mut carried = warm.clone();
        for block in &noise {
            let mut t = Tape::new();
            let layers: Vec<Tensor> = params
                .layers
                .iter()
                .map(|l| t.constant(l).unwrap())
                .collect();
            let out = pinet_forward_on_tape(
                &mut t,
                &layers,
                &cfg1,
                &x,
                &carried,
                std::slice::from_ref(block),
                0.05,
            )
            .unwrap();
            carried = ControlSeq::from_flat(3, 1, out.output.data().to_vec());
        }
        for (a, b) in two.iter().zip(carried.as_flat()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn noise_constants_get_no_gradient() {
        let params = tiny_params(4);
        let cfg = tiny_cfg();
        let warm = ControlSeq::zeros(3, 1);
        let noise = draw_noise(&cfg, 1, 13);
        let mut tape = Tape::new();
        let layers: Vec<Tensor> = params
            .layers
            .iter()
            .map(|l| tape.leaf(l).unwrap())
            .collect();
        let trace = pinet_forward_on_tape(
            &mut tape,
            &layers,
            &cfg,
            &[0.1, 0.0, 0.2, -0.1],
            &warm,
            &noise,
            0.05,
        )
        .unwrap();
        let loss = mse_on_tape(&mut tape, &trace.output, &[0.0, 0.0, 0.0]).unwrap();
        let grads = tape.backward(&loss).unwrap();
        for layer in &layers {
            assert!(grads.contains(layer));
        }
        for eps in &trace.noise_vecs[0] {
            assert!(!grads.contains(eps), "noise must stay out of the leaf set");
        }
        assert_eq!(grads.len(), layers.len());
    }

    #[test]
    fn node_count_matches_analytic_formula() {
        for (k, h, u_iters) in [(4, 3, 1), (7, 5, 2), (16, 20, 1)] {
            let mut cfg = tiny_cfg();
            cfg.rollouts = k;
            cfg.horizon = h;
            cfg.iterations = u_iters;
            let meta = PolicyMeta {
                state_dim: 4,
                control_dim: 1,
                horizon: h,
                hidden: 8,
                cost_hidden: 8,
            };
            let params =
                PolicyParams::init(PolicyKind::PiNet, meta, &mut ChaCha8Rng::seed_from_u64(5));
            let warm = ControlSeq::zeros(h, 1);
            let noise = draw_noise(&cfg, 1, 17);
            let mut tape = Tape::new();
            let layers: Vec<Tensor> = params
                .layers
                .iter()
                .map(|l| tape.leaf(l).unwrap())
                .collect();
            pinet_forward_on_tape(&mut tape, &layers, &cfg, &[0.0; 4], &warm, &noise, 0.05)
                .unwrap();
            assert_eq!(
                tape.node_count(),
                cfg.analytic_node_count(1),
                "K={k} H={h} U={u_iters}"
            );
        }
    }

    #[test]
    fn memory_validation_rejects_u200() {
        let mut cfg = PiNetConfig::default();
        cfg.iterations = 200;
        let err = cfg.validate_for_training(4, 1, 64).unwrap_err();
        assert!(err.to_string().contains("budget"));
        cfg.iterations = 1;
        assert!(cfg.validate_for_training(4, 1, 64).is_ok());
    }

    #[test]
    fn growing_k_preserves_earlier_samples() {
        let params = tiny_params(6);
        let x = [0.2, -0.1, 0.4, 0.0];
        let warm = ControlSeq::zeros(3, 1);
        let scores_for = |k: usize| {
            let mut cfg = tiny_cfg();
            cfg.rollouts = k;
            let noise = draw_noise(&cfg, 1, 23);
            let mut tape = Tape::new();
            let layers: Vec<Tensor> = params
                .layers
                .iter()
                .map(|l| tape.constant(l).unwrap())
                .collect();
            pinet_forward_on_tape(&mut tape, &layers, &cfg, &x, &warm, &noise, 0.05)
                .unwrap()
                .scores[0]
                .clone()
        };
        let small = scores_for(4);
        let large = scores_for(8);
        for (a, b) in small.iter().zip(&large) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn pinet_loss_examples() {
        let a = ControlSeq::from_flat(2, 1, vec![0.5, -0.5]);
        assert_eq!(pinet_loss(&a, &a), 0.0);
        let b = ControlSeq::from_flat(2, 1, vec![1.5, 0.5]);
        assert!((pinet_loss(&a, &b) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn end_to_end_gradient_matches_finite_differences() {
        let params = tiny_params(8);
        let cfg = tiny_cfg();
        let warm = ControlSeq::zeros(3, 1);
        let noise = draw_noise(&cfg, 1, 41);
        let x = [0.4, -0.3, 1.2, 0.1];
        let target = vec![0.8, -0.1, 0.3];
        let err = grad_check_multi(
            |tape, leaves| {
                let trace =
                    pinet_forward_on_tape(tape, leaves, &cfg, &x, &warm, &noise, 0.05)?;
                mse_on_tape(tape, &trace.output, &target)
            },
            &params.layers,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-4, "relative error {err}");
    }
}
