use std::sync::Arc;

use super::tape::NodeId;

/// Immutable dense array of 64-bit reals in row-major order.
///
/// A tensor optionally carries a handle to the tape node that produced it;
/// tensors built outside a tape have no handle until registered via
/// [`super::Tape::leaf`] or [`super::Tape::constant`].
#[derive(Clone, Debug)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Arc<[f64]>,
    node: Option<NodeId>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Self {
        let numel: usize = shape.iter().product();
        assert_eq!(
            numel,
            data.len(),
            "shape {:?} does not match {} data values",
            shape,
            data.len()
        );
        Tensor {
            shape,
            data: data.into(),
            node: None,
        }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        let n = data.len();
        Tensor::new(vec![n], data)
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        Tensor::new(vec![rows, cols], data)
    }

    pub fn scalar(v: f64) -> Self {
        Tensor::new(vec![1], vec![v])
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let numel = shape.iter().product();
        Tensor::new(shape, vec![0.0; numel])
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    /// Value of a one-element tensor.
    pub fn item(&self) -> f64 {
        assert!(self.is_scalar(), "item() on tensor of shape {:?}", self.shape);
        self.data[0]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn node(&self) -> Option<NodeId> {
        self.node
    }

    pub(super) fn with_node(mut self, id: NodeId) -> Self {
        self.node = Some(id);
        self
    }

    pub(super) fn shared_data(&self) -> Arc<[f64]> {
        Arc::clone(&self.data)
    }

    pub(super) fn from_shared(shape: Vec<usize>, data: Arc<[f64]>, node: NodeId) -> Self {
        Tensor {
            shape,
            data,
            node: Some(node),
        }
    }
}
