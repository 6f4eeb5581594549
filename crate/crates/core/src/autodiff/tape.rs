use std::collections::HashMap;
use std::sync::Arc;

use super::tensor::Tensor;
use super::{AdError, AdResult};

pub type NodeId = usize;

/// Recorded operation kinds. The set is closed under everything the
/// exponentiated-cost control update and tanh networks need.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpKind {
    Leaf,
    Constant,
    Affine,
    Tanh,
    Add,
    Mul,
    Exp,
    Neg,
    Scale,
    Sum,
    Concat,
    Slice,
    Div,
}

#[derive(Clone, Debug)]
enum Payload {
    Leaf,
    Constant,
    Affine { w: NodeId, x: NodeId, b: NodeId },
    Tanh(NodeId),
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Exp(NodeId),
    Neg(NodeId),
    Scale { x: NodeId, factor: f64 },
    Sum(NodeId),
    Concat(NodeId, NodeId),
    Slice { x: NodeId, start: usize, len: usize },
    Div(NodeId, NodeId),
}

impl Payload {
    fn kind(&self) -> OpKind {
        match self {
            Payload::Leaf => OpKind::Leaf,
            Payload::Constant => OpKind::Constant,
            Payload::Affine { .. } => OpKind::Affine,
            Payload::Tanh(_) => OpKind::Tanh,
            Payload::Add(..) => OpKind::Add,
            Payload::Mul(..) => OpKind::Mul,
            Payload::Exp(_) => OpKind::Exp,
            Payload::Neg(_) => OpKind::Neg,
            Payload::Scale { .. } => OpKind::Scale,
            Payload::Sum(_) => OpKind::Sum,
            Payload::Concat(..) => OpKind::Concat,
            Payload::Slice { .. } => OpKind::Slice,
            Payload::Div(..) => OpKind::Div,
        }
    }
}

struct Node {
    payload: Payload,
    shape: Vec<usize>,
    value: Arc<[f64]>,
}

/// Gradients of a scalar output with respect to every leaf on the tape.
///
/// Constants are deliberately absent: noise tensors and other fixed inputs
/// never appear here.
pub struct GradMap {
    grads: HashMap<NodeId, Tensor>,
}

impl GradMap {
    /// Gradient for a tensor that was registered as a leaf.
    pub fn grad(&self, t: &Tensor) -> Option<&Tensor> {
        t.node().and_then(|id| self.grads.get(&id))
    }

    pub fn by_id(&self, id: NodeId) -> Option<&Tensor> {
        self.grads.get(&id)
    }

    pub fn contains(&self, t: &Tensor) -> bool {
        t.node().map(|id| self.grads.contains_key(&id)).unwrap_or(false)
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }
}

/// Single-writer operation tape. Inputs of a node always precede it, so a
/// single reverse sweep visits every node exactly once.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Ids of all leaf (trainable/input) nodes, in recording order.
    pub fn leaf_ids(&self) -> Vec<NodeId> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| matches!(n.payload, Payload::Leaf))
            .map(|(i, _)| i)
            .collect()
    }

    fn push(&mut self, payload: Payload, shape: Vec<usize>, value: Vec<f64>) -> AdResult<Tensor> {
        let op = payload.kind();
        if !value.iter().all(|v| v.is_finite()) {
            return Err(AdError::NumericOverflow {
                op: op_name(op),
            });
        }
        let id = self.nodes.len();
        let value: Arc<[f64]> = value.into();
        self.nodes.push(Node {
            payload,
            shape: shape.clone(),
            value: Arc::clone(&value),
        });
        Ok(Tensor::from_shared(shape, value, id))
    }

    fn input_id(&self, op: OpKind, t: &Tensor) -> AdResult<NodeId> {
        match t.node() {
            Some(id) if id < self.nodes.len() => Ok(id),
            _ => Err(AdError::NotOnTape { op: op_name(op) }),
        }
    }

    /// Registers a trainable/input tensor. Leaves receive gradients.
    pub fn leaf(&mut self, t: &Tensor) -> AdResult<Tensor> {
        let id = self.nodes.len();
        if !t.is_finite() {
            return Err(AdError::NumericOverflow { op: "leaf" });
        }
        self.nodes.push(Node {
            payload: Payload::Leaf,
            shape: t.shape().to_vec(),
            value: t.shared_data(),
        });
        Ok(Tensor::from_shared(t.shape().to_vec(), t.shared_data(), id))
    }

    /// Registers a fixed tensor. Constants are excluded from the gradient
    /// map; sampled noise enters the graph this way.
    pub fn constant(&mut self, t: &Tensor) -> AdResult<Tensor> {
        let id = self.nodes.len();
        if !t.is_finite() {
            return Err(AdError::NumericOverflow { op: "constant" });
        }
        self.nodes.push(Node {
            payload: Payload::Constant,
            shape: t.shape().to_vec(),
            value: t.shared_data(),
        });
        Ok(Tensor::from_shared(t.shape().to_vec(), t.shared_data(), id))
    }

    /// `w·x + b` with `w` of shape `[p, q]`, `x` of shape `[q]`, `b` of
    /// shape `[p]`.
    pub fn affine(&mut self, w: &Tensor, x: &Tensor, b: &Tensor) -> AdResult<Tensor> {
        let wid = self.input_id(OpKind::Affine, w)?;
        let xid = self.input_id(OpKind::Affine, x)?;
        let bid = self.input_id(OpKind::Affine, b)?;
        let (wshape, xshape, bshape) = (w.shape(), x.shape(), b.shape());
        let ok = wshape.len() == 2
            && xshape.len() == 1
            && bshape.len() == 1
            && wshape[1] == xshape[0]
            && wshape[0] == bshape[0];
        if !ok {
            return Err(AdError::ShapeMismatch {
                op: "affine",
                details: format!("w {:?}, x {:?}, b {:?}", wshape, xshape, bshape),
            });
        }
        let (p, q) = (wshape[0], wshape[1]);
        let (wd, xd, bd) = (w.data(), x.data(), b.data());
        let mut out = vec![0.0; p];
        for i in 0..p {
            let row = &wd[i * q..(i + 1) * q];
            let mut acc = bd[i];
            for j in 0..q {
                acc += row[j] * xd[j];
            }
            out[i] = acc;
        }
        self.push(Payload::Affine { w: wid, x: xid, b: bid }, vec![p], out)
    }

    pub fn tanh(&mut self, x: &Tensor) -> AdResult<Tensor> {
        let xid = self.input_id(OpKind::Tanh, x)?;
        let out = x.data().iter().map(|v| v.tanh()).collect();
        self.push(Payload::Tanh(xid), x.shape().to_vec(), out)
    }

    pub fn exp(&mut self, x: &Tensor) -> AdResult<Tensor> {
        let xid = self.input_id(OpKind::Exp, x)?;
        let out = x.data().iter().map(|v| v.exp()).collect();
        self.push(Payload::Exp(xid), x.shape().to_vec(), out)
    }

    pub fn neg(&mut self, x: &Tensor) -> AdResult<Tensor> {
        let xid = self.input_id(OpKind::Neg, x)?;
        let out = x.data().iter().map(|v| -v).collect();
        self.push(Payload::Neg(xid), x.shape().to_vec(), out)
    }

    pub fn scale(&mut self, x: &Tensor, factor: f64) -> AdResult<Tensor> {
        let xid = self.input_id(OpKind::Scale, x)?;
        let out = x.data().iter().map(|v| v * factor).collect();
        self.push(Payload::Scale { x: xid, factor }, x.shape().to_vec(), out)
    }

    fn binary_ids(&self, op: OpKind, a: &Tensor, b: &Tensor) -> AdResult<(NodeId, NodeId)> {
        let aid = self.input_id(op, a)?;
        let bid = self.input_id(op, b)?;
        if a.shape() != b.shape() {
            return Err(AdError::ShapeMismatch {
                op: op_name(op),
                details: format!("{:?} vs {:?}", a.shape(), b.shape()),
            });
        }
        Ok((aid, bid))
    }

    pub fn add(&mut self, a: &Tensor, b: &Tensor) -> AdResult<Tensor> {
        let (aid, bid) = self.binary_ids(OpKind::Add, a, b)?;
        let out = a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect();
        self.push(Payload::Add(aid, bid), a.shape().to_vec(), out)
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: &Tensor, b: &Tensor) -> AdResult<Tensor> {
        let (aid, bid) = self.binary_ids(OpKind::Mul, a, b)?;
        let out = a.data().iter().zip(b.data()).map(|(x, y)| x * y).collect();
        self.push(Payload::Mul(aid, bid), a.shape().to_vec(), out)
    }

    /// Elementwise quotient.
    pub fn div(&mut self, a: &Tensor, b: &Tensor) -> AdResult<Tensor> {
        let (aid, bid) = self.binary_ids(OpKind::Div, a, b)?;
        let out = a.data().iter().zip(b.data()).map(|(x, y)| x / y).collect();
        self.push(Payload::Div(aid, bid), a.shape().to_vec(), out)
    }

    /// Sum of all entries, as a scalar tensor.
    pub fn sum(&mut self, x: &Tensor) -> AdResult<Tensor> {
        let xid = self.input_id(OpKind::Sum, x)?;
        let total: f64 = x.data().iter().sum();
        self.push(Payload::Sum(xid), vec![1], vec![total])
    }

    /// Concatenation of two 1-D tensors.
    pub fn concat(&mut self, a: &Tensor, b: &Tensor) -> AdResult<Tensor> {
        let aid = self.input_id(OpKind::Concat, a)?;
        let bid = self.input_id(OpKind::Concat, b)?;
        if a.shape().len() != 1 || b.shape().len() != 1 {
            return Err(AdError::ShapeMismatch {
                op: "concat",
                details: format!("expected vectors, got {:?} and {:?}", a.shape(), b.shape()),
            });
        }
        let mut out = Vec::with_capacity(a.len() + b.len());
        out.extend_from_slice(a.data());
        out.extend_from_slice(b.data());
        self.push(Payload::Concat(aid, bid), vec![a.len() + b.len()], out)
    }

    /// Contiguous sub-vector `x[start..start+len]` of a 1-D tensor.
    pub fn slice(&mut self, x: &Tensor, start: usize, len: usize) -> AdResult<Tensor> {
        let xid = self.input_id(OpKind::Slice, x)?;
        if x.shape().len() != 1 || start + len > x.len() {
            return Err(AdError::ShapeMismatch {
                op: "slice",
                details: format!("[{start}..{}] of shape {:?}", start + len, x.shape()),
            });
        }
        let out = x.data()[start..start + len].to_vec();
        self.push(Payload::Slice { x: xid, start, len }, vec![len], out)
    }

    /// Reverse sweep from a recorded scalar. Gradients accumulate at shared
    /// nodes; every leaf gets an entry (zero if unreached).
    pub fn backward(&self, output: &Tensor) -> AdResult<GradMap> {
        let out_id = match output.node() {
            Some(id) if id < self.nodes.len() => id,
            _ => return Err(AdError::NotOnTape { op: "backward" }),
        };
        if self.nodes[out_id].value.len() != 1 {
            return Err(AdError::NotScalar(self.nodes[out_id].shape.clone()));
        }

        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[out_id] = Some(vec![1.0]);

        for id in (0..=out_id).rev() {
            let Some(g) = grads[id].take() else { continue };
            match &self.nodes[id].payload {
                Payload::Leaf | Payload::Constant => {
                    grads[id] = Some(g);
                    continue;
                }
                Payload::Affine { w, x, b } => {
                    let q = self.nodes[*x].value.len();
                    let p = g.len();
                    let wval = &self.nodes[*w].value;
                    let xval = &self.nodes[*x].value;
                    {
                        let gw = self.grad_buf(&mut grads, *w);
                        for i in 0..p {
                            let gi = g[i];
                            let row = &mut gw[i * q..(i + 1) * q];
                            for j in 0..q {
                                row[j] += gi * xval[j];
                            }
                        }
                    }
                    {
                        let gx = self.grad_buf(&mut grads, *x);
                        for i in 0..p {
                            let gi = g[i];
                            let row = &wval[i * q..(i + 1) * q];
                            for j in 0..q {
                                gx[j] += gi * row[j];
                            }
                        }
                    }
                    {
                        let gb = self.grad_buf(&mut grads, *b);
                        for i in 0..p {
                            gb[i] += g[i];
                        }
                    }
                }
                Payload::Tanh(x) => {
                    let y = &self.nodes[id].value;
                    let gx = self.grad_buf(&mut grads, *x);
                    for i in 0..g.len() {
                        gx[i] += g[i] * (1.0 - y[i] * y[i]);
                    }
                }
                Payload::Exp(x) => {
                    let y = &self.nodes[id].value;
                    let gx = self.grad_buf(&mut grads, *x);
                    for i in 0..g.len() {
                        gx[i] += g[i] * y[i];
                    }
                }
                Payload::Neg(x) => {
                    let gx = self.grad_buf(&mut grads, *x);
                    for i in 0..g.len() {
                        gx[i] -= g[i];
                    }
                }
                Payload::Scale { x, factor } => {
                    let gx = self.grad_buf(&mut grads, *x);
                    for i in 0..g.len() {
                        gx[i] += g[i] * factor;
                    }
                }
                Payload::Add(a, b) => {
                    {
                        let ga = self.grad_buf(&mut grads, *a);
                        for i in 0..g.len() {
                            ga[i] += g[i];
                        }
                    }
                    let gb = self.grad_buf(&mut grads, *b);
                    for i in 0..g.len() {
                        gb[i] += g[i];
                    }
                }
                Payload::Mul(a, b) => {
                    let aval = Arc::clone(&self.nodes[*a].value);
                    let bval = Arc::clone(&self.nodes[*b].value);
                    {
                        let ga = self.grad_buf(&mut grads, *a);
                        for i in 0..g.len() {
                            ga[i] += g[i] * bval[i];
                        }
                    }
                    let gb = self.grad_buf(&mut grads, *b);
                    for i in 0..g.len() {
                        gb[i] += g[i] * aval[i];
                    }
                }
                Payload::Div(a, b) => {
                    let y = Arc::clone(&self.nodes[id].value);
                    let bval = Arc::clone(&self.nodes[*b].value);
                    {
                        let ga = self.grad_buf(&mut grads, *a);
                        for i in 0..g.len() {
                            ga[i] += g[i] / bval[i];
                        }
                    }
                    let gb = self.grad_buf(&mut grads, *b);
                    for i in 0..g.len() {
                        gb[i] -= g[i] * y[i] / bval[i];
                    }
                }
                Payload::Sum(x) => {
                    let gx = self.grad_buf(&mut grads, *x);
                    for v in gx.iter_mut() {
                        *v += g[0];
                    }
                }
                Payload::Concat(a, b) => {
                    let la = self.nodes[*a].value.len();
                    {
                        let ga = self.grad_buf(&mut grads, *a);
                        for i in 0..la {
                            ga[i] += g[i];
                        }
                    }
                    let gb = self.grad_buf(&mut grads, *b);
                    for i in 0..gb.len() {
                        gb[i] += g[la + i];
                    }
                }
                Payload::Slice { x, start, len } => {
                    let gx = self.grad_buf(&mut grads, *x);
                    for i in 0..*len {
                        gx[start + i] += g[i];
                    }
                }
            }
        }

        let mut map = HashMap::new();
        for (id, node) in self.nodes.iter().enumerate() {
            if matches!(node.payload, Payload::Leaf) {
                let buf = grads[id]
                    .take()
                    .unwrap_or_else(|| vec![0.0; node.value.len()]);
                map.insert(id, Tensor::new(node.shape.clone(), buf));
            }
        }
        Ok(GradMap { grads: map })
    }

    fn grad_buf<'a>(&self, grads: &'a mut [Option<Vec<f64>>], id: NodeId) -> &'a mut Vec<f64> {
        grads[id].get_or_insert_with(|| vec![0.0; self.nodes[id].value.len()])
    }
}

fn op_name(op: OpKind) -> &'static str {
    match op {
        OpKind::Leaf => "leaf",
        OpKind::Constant => "constant",
        OpKind::Affine => "affine",
        OpKind::Tanh => "tanh",
        OpKind::Add => "add",
        OpKind::Mul => "elementwise-mul",
        OpKind::Exp => "exp",
        OpKind::Neg => "negate",
        OpKind::Scale => "scale",
        OpKind::Sum => "reduce-sum",
        OpKind::Concat => "concat",
        OpKind::Slice => "slice",
        OpKind::Div => "divide",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tanh_of_zero_is_zero() {
        let mut tape = Tape::new();
        let x = tape.leaf(&Tensor::vector(vec![0.0, 0.0])).unwrap();
        let y = tape.tanh(&x).unwrap();
        assert_eq!(y.data(), &[0.0, 0.0]);
    }

    #[test]
    fn affine_identity_map() {
        let mut tape = Tape::new();
        let w = tape
            .leaf(&Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]))
            .unwrap();
        let x = tape.leaf(&Tensor::vector(vec![3.0, 4.0])).unwrap();
        let b = tape.leaf(&Tensor::vector(vec![0.0, 0.0])).unwrap();
        let y = tape.affine(&w, &x, &b).unwrap();
        assert_eq!(y.data(), &[3.0, 4.0]);
    }

    #[test]
    fn exp_then_sum_of_zero_is_one() {
        let mut tape = Tape::new();
        let x = tape.leaf(&Tensor::vector(vec![0.0])).unwrap();
        let e = tape.exp(&x).unwrap();
        let s = tape.sum(&e).unwrap();
        assert_eq!(s.item(), 1.0);
    }

    #[test]
    fn tanh_grad_at_zero_is_one() {
        let mut tape = Tape::new();
        let x = tape.leaf(&Tensor::scalar(0.0)).unwrap();
        let y = tape.tanh(&x).unwrap();
        let grads = tape.backward(&y).unwrap();
        assert_eq!(grads.grad(&x).unwrap().item(), 1.0);
    }

    #[test]
    fn square_grad() {
        // f(x) = sum(x*x), x = [3] -> grad [6]
        let mut tape = Tape::new();
        let x = tape.leaf(&Tensor::vector(vec![3.0])).unwrap();
        let sq = tape.mul(&x, &x).unwrap();
        let y = tape.sum(&sq).unwrap();
        let grads = tape.backward(&y).unwrap();
        assert_eq!(grads.grad(&x).unwrap().data(), &[6.0]);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut tape = Tape::new();
        let a = tape.leaf(&Tensor::vector(vec![1.0, 2.0])).unwrap();
        let b = tape.leaf(&Tensor::vector(vec![1.0])).unwrap();
        let err = tape.add(&a, &b).unwrap_err();
        assert!(err.to_string().contains("add"));
    }

    #[test]
    fn overflow_is_an_error() {
        let mut tape = Tape::new();
        let x = tape.leaf(&Tensor::vector(vec![1e100])).unwrap();
        let sq = tape.mul(&x, &x).unwrap();
        assert!(matches!(
            tape.mul(&sq, &sq),
            Err(AdError::NumericOverflow { .. })
        ));
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut tape = Tape::new();
        let x = tape.leaf(&Tensor::vector(vec![1.0, 2.0])).unwrap();
        let y = tape.tanh(&x).unwrap();
        assert!(matches!(tape.backward(&y), Err(AdError::NotScalar(_))));
    }

    #[test]
    fn backward_rejects_foreign_tensor() {
        let tape = Tape::new();
        let x = Tensor::scalar(1.0);
        assert!(matches!(tape.backward(&x), Err(AdError::NotOnTape { .. })));
    }

    #[test]
    fn constants_are_not_in_grad_map() {
        let mut tape = Tape::new();
        let x = tape.leaf(&Tensor::scalar(2.0)).unwrap();
        let c = tape.constant(&Tensor::scalar(3.0)).unwrap();
        let y = tape.mul(&x, &c).unwrap();
        let s = tape.sum(&y).unwrap();
        let grads = tape.backward(&s).unwrap();
        assert!(grads.contains(&x));
        assert!(!grads.contains(&c));
        assert_eq!(grads.len(), 1);
    }

    #[test]
    fn accumulation_at_shared_nodes() {
        // f = sum(x + x) -> grad 2
        let mut tape = Tape::new();
        let x = tape.leaf(&Tensor::scalar(5.0)).unwrap();
        let y = tape.add(&x, &x).unwrap();
        let s = tape.sum(&y).unwrap();
        let grads = tape.backward(&s).unwrap();
        assert_eq!(grads.grad(&x).unwrap().item(), 2.0);
    }

    #[test]
    fn unreached_leaf_gets_zero_grad() {
        let mut tape = Tape::new();
        let x = tape.leaf(&Tensor::scalar(1.0)).unwrap();
        let unused = tape.leaf(&Tensor::vector(vec![1.0, 2.0])).unwrap();
        let y = tape.tanh(&x).unwrap();
        let grads = tape.backward(&y).unwrap();
        assert_eq!(grads.grad(&unused).unwrap().data(), &[0.0, 0.0]);
    }

    #[test]
    fn replay_is_deterministic() {
        let build = || {
            let mut tape = Tape::new();
            let x = tape.leaf(&Tensor::vector(vec![0.3, -0.7, 1.2])).unwrap();
            let t = tape.tanh(&x).unwrap();
            let e = tape.exp(&t).unwrap();
            let s = tape.sum(&e).unwrap();
            let g = tape.backward(&s).unwrap();
            (s.item(), g.grad(&x).unwrap().data().to_vec())
        };
        let (v1, g1) = build();
        let (v2, g2) = build();
        assert_eq!(v1.to_bits(), v2.to_bits());
        assert_eq!(g1, g2);
    }
}
