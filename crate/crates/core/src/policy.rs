//! The learned baseline policies: reactive FNN, sequence RNN, MPC-FNN and
//! MPC-RNN, all single-hidden-layer tanh networks, plus the parameter
//! container shared with the differentiable planner.
//!
//! Hidden widths are chosen per kind so that trainable parameter counts
//! match across policies (see [`parity_width`]).

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{AdResult, Tape, Tensor};
use crate::mppi::ControlSeq;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    /// Reactive policy: current state in, one control out.
    Fnn,
    /// Recurrent policy over the visited state sequence, one control out.
    Rnn,
    /// State plus warm-start sequence in, whole control sequence out.
    MpcFnn,
    /// Recurrent planner consuming the warm start one step at a time.
    MpcRnn,
    /// Differentiable path-integral planner.
    PiNet,
}

impl PolicyKind {
    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::Fnn => "fnn",
            PolicyKind::Rnn => "rnn",
            PolicyKind::MpcFnn => "mpc-fnn",
            PolicyKind::MpcRnn => "mpc-rnn",
            PolicyKind::PiNet => "pinet",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "fnn" => PolicyKind::Fnn,
            "rnn" => PolicyKind::Rnn,
            "mpc-fnn" => PolicyKind::MpcFnn,
            "mpc-rnn" => PolicyKind::MpcRnn,
            "pinet" => PolicyKind::PiNet,
            other => return Err(Error::Config(format!("unknown policy kind `{other}`"))),
        })
    }

    /// MPC kinds consume a warm-start sequence and emit a whole sequence.
    pub fn is_mpc(&self) -> bool {
        matches!(self, PolicyKind::MpcFnn | PolicyKind::MpcRnn | PolicyKind::PiNet)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyMeta {
    pub state_dim: usize,
    pub control_dim: usize,
    pub horizon: usize,
    pub hidden: usize,
    /// Hidden width of the planner's cost network; zero for other kinds.
    pub cost_hidden: usize,
}

/// Per-layer weight matrices and bias vectors for one policy, in the fixed
/// order documented by [`layer_shapes`].
#[derive(Clone, Debug)]
pub struct PolicyParams {
    pub kind: PolicyKind,
    pub meta: PolicyMeta,
    pub layers: Vec<Tensor>,
}

/// Layer shapes for a policy kind, in storage order.
pub fn layer_shapes(kind: PolicyKind, meta: &PolicyMeta) -> Vec<Vec<usize>> {
    let (n, m, horizon, h) = (
        meta.state_dim,
        meta.control_dim,
        meta.horizon,
        meta.hidden,
    );
    match kind {
        PolicyKind::Fnn => vec![vec![h, n], vec![h], vec![m, h], vec![m]],
        PolicyKind::Rnn => vec![vec![h, n], vec![h, h], vec![h], vec![m, h], vec![m]],
        PolicyKind::MpcFnn => {
            let input = n + horizon * m;
            let output = horizon * m;
            vec![vec![h, input], vec![h], vec![output, h], vec![output]]
        }
        PolicyKind::MpcRnn => vec![
            vec![h, n],
            vec![h],
            vec![h, h],
            vec![h, m],
            vec![h],
            vec![m, h],
            vec![m],
        ],
        PolicyKind::PiNet => {
            let hc = meta.cost_hidden;
            vec![
                vec![h, h],
                vec![h, m],
                vec![h],
                vec![hc, h + m],
                vec![hc],
                vec![1, hc],
                vec![1],
            ]
        }
    }
}

pub fn param_count(kind: PolicyKind, meta: &PolicyMeta) -> usize {
    layer_shapes(kind, meta)
        .iter()
        .map(|s| s.iter().product::<usize>())
        .sum()
}

/// Hidden width whose parameter count is nearest the target; policies are
/// matched to a common budget by adjusting width, not depth.
pub fn parity_width(
    kind: PolicyKind,
    state_dim: usize,
    control_dim: usize,
    horizon: usize,
    target_params: usize,
) -> usize {
    let mut best = (1usize, usize::MAX);
    for h in 1..=8192 {
        let meta = PolicyMeta {
            state_dim,
            control_dim,
            horizon,
            hidden: h,
            cost_hidden: 0,
        };
        let count = param_count(kind, &meta);
        let gap = count.abs_diff(target_params);
        if gap < best.1 {
            best = (h, gap);
        }
        if count > target_params * 2 {
            break;
        }
    }
    best.0
}

impl PolicyParams {
    /// Uniform init on [-1/sqrt(fan_in), 1/sqrt(fan_in)] per layer.
    pub fn init(kind: PolicyKind, meta: PolicyMeta, rng: &mut ChaCha8Rng) -> Self {
        let layers = layer_shapes(kind, &meta)
            .into_iter()
            .map(|shape| {
                let fan_in = if shape.len() == 2 { shape[1] } else { shape[0] };
                let bound = 1.0 / (fan_in as f64).sqrt();
                let numel: usize = shape.iter().product();
                let data = (0..numel).map(|_| rng.gen_range(-bound..=bound)).collect();
                Tensor::new(shape, data)
            })
            .collect();
        PolicyParams { kind, meta, layers }
    }

    pub fn zeros(kind: PolicyKind, meta: PolicyMeta) -> Self {
        let layers = layer_shapes(kind, &meta)
            .into_iter()
            .map(Tensor::zeros)
            .collect();
        PolicyParams { kind, meta, layers }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.len()).sum()
    }

    /// All parameters as one flat vector (optimizer state layout).
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(l.data());
        }
        out
    }

    /// Rebuilds layers from a flat vector produced by [`Self::flatten`].
    pub fn unflatten(&self, flat: &[f64]) -> PolicyParams {
        assert_eq!(flat.len(), self.param_count());
        let mut layers = Vec::with_capacity(self.layers.len());
        let mut offset = 0;
        for l in &self.layers {
            let next = offset + l.len();
            layers.push(Tensor::new(l.shape().to_vec(), flat[offset..next].to_vec()));
            offset = next;
        }
        PolicyParams {
            kind: self.kind,
            meta: self.meta,
            layers,
        }
    }
}

// ---------------------------------------------------------------------------
// Tape-level forward passes. Layer tensors must already be on the tape
// (as leaves when training, constants at inference).

/// u = W2 tanh(W1 x + b1) + b2
pub fn fnn_forward(tape: &mut Tape, layers: &[Tensor], x: &Tensor) -> AdResult<Tensor> {
    let a = tape.affine(&layers[0], x, &layers[1])?;
    let hidden = tape.tanh(&a)?;
    tape.affine(&layers[2], &hidden, &layers[3])
}

/// h' = tanh(Wx x + Wh h + b); u = Wo h' + bo. Returns (u, h').
pub fn rnn_forward(
    tape: &mut Tape,
    layers: &[Tensor],
    x: &Tensor,
    h: &Tensor,
) -> AdResult<(Tensor, Tensor)> {
    let zero_bias = tape.constant(&Tensor::zeros(vec![layers[2].len()]))?;
    let from_x = tape.affine(&layers[0], x, &layers[2])?;
    let from_h = tape.affine(&layers[1], h, &zero_bias)?;
    let pre = tape.add(&from_x, &from_h)?;
    let h_next = tape.tanh(&pre)?;
    let u = tape.affine(&layers[3], &h_next, &layers[4])?;
    Ok((u, h_next))
}

/// Flattens [x || warm] through the hidden layer to a whole sequence.
pub fn mpc_fnn_forward(
    tape: &mut Tape,
    layers: &[Tensor],
    x: &Tensor,
    warm_flat: &Tensor,
) -> AdResult<Tensor> {
    let input = tape.concat(x, warm_flat)?;
    let a = tape.affine(&layers[0], &input, &layers[1])?;
    let hidden = tape.tanh(&a)?;
    tape.affine(&layers[2], &hidden, &layers[3])
}

/// Hidden state embedded from x, recurrence unrolled over the horizon
/// consuming one warm control per step, one output control per step.
pub fn mpc_rnn_forward(
    tape: &mut Tape,
    layers: &[Tensor],
    x: &Tensor,
    warm_flat: &Tensor,
    horizon: usize,
    control_dim: usize,
) -> AdResult<Tensor> {
    let (w_init, b_init) = (&layers[0], &layers[1]);
    let (wh, wu, b) = (&layers[2], &layers[3], &layers[4]);
    let (wo, bo) = (&layers[5], &layers[6]);
    let zero_bias = tape.constant(&Tensor::zeros(vec![b.len()]))?;

    let mut h = tape.affine(w_init, x, b_init)?;
    let mut out: Option<Tensor> = None;
    for t in 0..horizon {
        let u_t = tape.slice(warm_flat, t * control_dim, control_dim)?;
        let from_h = tape.affine(wh, &h, b)?;
        let from_u = tape.affine(wu, &u_t, &zero_bias)?;
        let pre = tape.add(&from_h, &from_u)?;
        h = tape.tanh(&pre)?;
        let u_out = tape.affine(wo, &h, bo)?;
        out = Some(match out {
            Some(acc) => tape.concat(&acc, &u_out)?,
            None => u_out,
        });
    }
    Ok(out.expect("horizon >= 1"))
}

// ---------------------------------------------------------------------------
// Value-level inference. Each call records on a throwaway tape so training
// and inference share one arithmetic path.

fn on_tape_constants(tape: &mut Tape, params: &PolicyParams) -> AdResult<Vec<Tensor>> {
    params.layers.iter().map(|l| tape.constant(l)).collect()
}

fn clamp_vec(mut v: Vec<f64>, limits: (f64, f64)) -> Vec<f64> {
    for x in v.iter_mut() {
        *x = x.clamp(limits.0, limits.1);
    }
    v
}

/// Reactive policy: one control from the current state, clamped.
pub fn fnn_act(params: &PolicyParams, x: &[f64], limits: (f64, f64)) -> Result<Vec<f64>> {
    debug_assert_eq!(params.kind, PolicyKind::Fnn);
    let mut tape = Tape::new();
    let layers = on_tape_constants(&mut tape, params)?;
    let xt = tape.constant(&Tensor::vector(x.to_vec()))?;
    let u = fnn_forward(&mut tape, &layers, &xt)?;
    Ok(clamp_vec(u.data().to_vec(), limits))
}

/// Recurrent policy: consumes the newest state, carries the hidden state
/// across the episode. Returns (control, next hidden).
pub fn rnn_act(
    params: &PolicyParams,
    x: &[f64],
    hidden: &[f64],
    limits: (f64, f64),
) -> Result<(Vec<f64>, Vec<f64>)> {
    debug_assert_eq!(params.kind, PolicyKind::Rnn);
    let mut tape = Tape::new();
    let layers = on_tape_constants(&mut tape, params)?;
    let xt = tape.constant(&Tensor::vector(x.to_vec()))?;
    let ht = tape.constant(&Tensor::vector(hidden.to_vec()))?;
    let (u, h_next) = rnn_forward(&mut tape, &layers, &xt, &ht)?;
    Ok((clamp_vec(u.data().to_vec(), limits), h_next.data().to_vec()))
}

/// Sequence policy: whole plan from [x || warm], clamped.
pub fn mpc_fnn_plan(
    params: &PolicyParams,
    x: &[f64],
    warm: &ControlSeq,
    limits: (f64, f64),
) -> Result<ControlSeq> {
    debug_assert_eq!(params.kind, PolicyKind::MpcFnn);
    let mut tape = Tape::new();
    let layers = on_tape_constants(&mut tape, params)?;
    let xt = tape.constant(&Tensor::vector(x.to_vec()))?;
    let wt = tape.constant(&Tensor::vector(warm.as_flat().to_vec()))?;
    let out = mpc_fnn_forward(&mut tape, &layers, &xt, &wt)?;
    let mut seq = ControlSeq::from_flat(warm.horizon(), warm.dim(), out.data().to_vec());
    seq.clamp(limits.0, limits.1);
    Ok(seq)
}

/// Recurrent sequence policy, clamped.
pub fn mpc_rnn_plan(
    params: &PolicyParams,
    x: &[f64],
    warm: &ControlSeq,
    limits: (f64, f64),
) -> Result<ControlSeq> {
    debug_assert_eq!(params.kind, PolicyKind::MpcRnn);
    let mut tape = Tape::new();
    let layers = on_tape_constants(&mut tape, params)?;
    let xt = tape.constant(&Tensor::vector(x.to_vec()))?;
    let wt = tape.constant(&Tensor::vector(warm.as_flat().to_vec()))?;
    let out = mpc_rnn_forward(&mut tape, &layers, &xt, &wt, warm.horizon(), warm.dim())?;
    let mut seq = ControlSeq::from_flat(warm.horizon(), warm.dim(), out.data().to_vec());
    seq.clamp(limits.0, limits.1);
    Ok(seq)
}
