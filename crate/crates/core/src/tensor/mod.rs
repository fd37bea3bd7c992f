//! Minimal N-dimensional array with reverse-mode automatic differentiation.
//!
//! [`Tensor`] is a plain value (shape + row-major data). Differentiation is
//! handled by [`Tape`]: operations executed through a tape record backward
//! rules, `Tape::backward` replays them in reverse, and gradients are then
//! harvested back into [`Parameter`]s.

mod check;
mod conv;
mod io;
mod ops;
mod tape;

pub use check::{grad_check, numeric_gradient, ScalarFn};
pub use io::{read_tensor, write_tensor, SVT_MAGIC};
pub use tape::{Tape, Var};

use crate::scalar::Scalar;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("shape {shape:?} implies {expected} elements, data has {actual}")]
    ShapeDataMismatch {
        shape: Vec<usize>,
        expected: usize,
        actual: usize,
    },
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("{op}: expected rank {expected}, got shape {shape:?}")]
    RankMismatch {
        op: &'static str,
        expected: usize,
        shape: Vec<usize>,
    },
    #[error("convolution output size is not exact: input {input}, kernel {kernel}, stride {stride}, padding {padding}")]
    NonExactConvOutput {
        input: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("target value {value} outside [0, 1]")]
    TargetOutOfRange { value: f64 },
    #[error("batch of size {0} too small for batch statistics (need >= 2)")]
    BatchTooSmall(usize),
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("tensor container i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid tensor container: {0}")]
    BadContainer(String),
}

pub type Result<T> = std::result::Result<T, TensorError>;

/// Dense row-major array of [`Scalar`] values.
///
/// `grad`, when present, has exactly `data.len()` elements and holds the
/// accumulated gradient of the last backward passes (see [`Parameter`]).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
    pub requires_grad: bool,
    pub grad: Option<Vec<T>>,
}

impl<T: Scalar> Tensor<T> {
    /// Build a tensor from shape and row-major data, checking the element count.
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(TensorError::ShapeDataMismatch {
                shape,
                expected,
                actual: data.len(),
            });
        }
        Ok(Tensor {
            shape,
            data,
            requires_grad: false,
            grad: None,
        })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n: usize = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![T::zero(); n],
            requires_grad: false,
            grad: None,
        }
    }

    pub fn full(shape: &[usize], value: T) -> Self {
        let n: usize = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; n],
            requires_grad: false,
            grad: None,
        }
    }

    /// Rank-0 scalar tensor.
    pub fn scalar(value: T) -> Self {
        Tensor {
            shape: Vec::new(),
            data: vec![value],
            requires_grad: false,
            grad: None,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1 && self.shape.is_empty()
    }

    /// The single element of a rank-0 or one-element tensor.
    pub fn item(&self) -> T {
        assert_eq!(self.data.len(), 1, "item() on tensor with {} elements", self.data.len());
        self.data[0]
    }

    /// Same data, new shape; element counts must match.
    pub fn reshape(&self, shape: &[usize]) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != self.data.len() {
            return Err(TensorError::ShapeDataMismatch {
                shape: shape.to_vec(),
                expected,
                actual: self.data.len(),
            });
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data: self.data.clone(),
            requires_grad: false,
            grad: None,
        })
    }

    /// Consume self, returning the data with a new shape.
    pub fn into_reshaped(mut self, shape: &[usize]) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != self.data.len() {
            return Err(TensorError::ShapeDataMismatch {
                shape: shape.to_vec(),
                expected,
                actual: self.data.len(),
            });
        }
        self.shape = shape.to_vec();
        self.grad = None;
        Ok(self)
    }

    /// Zero the gradient buffer if present.
    pub fn zero_grad(&mut self) {
        if let Some(g) = self.grad.as_mut() {
            g.iter_mut().for_each(|v| *v = T::zero());
        }
    }

    /// Add `delta` into the gradient buffer, allocating it on first use.
    pub fn accumulate_grad(&mut self, delta: &[T]) {
        assert_eq!(delta.len(), self.data.len());
        let grad = self
            .grad
            .get_or_insert_with(|| vec![T::zero(); self.data.len()]);
        for (g, d) in grad.iter_mut().zip(delta) {
            *g += *d;
        }
    }

    /// Element-wise cast to another scalar type (used by the f64 oracles).
    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::from_f64(v.as_f64())).collect(),
            requires_grad: false,
            grad: None,
        }
    }

    /// Fill with i.i.d. standard-normal draws scaled by `std`.
    pub fn randn<R: rand::Rng + ?Sized>(shape: &[usize], std: T, rng: &mut R) -> Self {
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| T::standard_normal(rng) * std).collect();
        Tensor {
            shape: shape.to_vec(),
            data,
            requires_grad: false,
            grad: None,
        }
    }

    /// Fill with i.i.d. uniform draws on `[lo, hi)`.
    pub fn rand_uniform<R: rand::Rng + ?Sized>(shape: &[usize], lo: T, hi: T, rng: &mut R) -> Self {
        let n: usize = shape.iter().product();
        let span = hi - lo;
        let data = (0..n)
            .map(|_| lo + span * T::from_f64(rng.gen::<f64>()))
            .collect();
        Tensor {
            shape: shape.to_vec(),
            data,
            requires_grad: false,
            grad: None,
        }
    }
}

/// Named trainable tensor. Names are unique within a model bundle and double
/// as checkpoint file names (e.g. `encoder.conv1.weight`).
#[derive(Debug, Clone)]
pub struct Parameter<T> {
    pub tensor: Tensor<T>,
    pub name: String,
}

impl<T: Scalar> Parameter<T> {
    pub fn new(name: impl Into<String>, mut tensor: Tensor<T>) -> Self {
        tensor.requires_grad = true;
        Parameter {
            tensor,
            name: name.into(),
        }
    }
}

/// Inner product of two equally-sized tensors, accumulated in f64.
pub fn dot<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> f64 {
    assert_eq!(a.len(), b.len());
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| x.as_f64() * y.as_f64())
        .sum()
}

/// Concatenate two rank-2 tensors along the column axis.
pub fn concat_cols<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    if a.shape().len() != 2 || b.shape().len() != 2 || a.shape()[0] != b.shape()[0] {
        return Err(TensorError::ShapeMismatch {
            op: "concat_cols",
            lhs: a.shape().to_vec(),
            rhs: b.shape().to_vec(),
        });
    }
    let (n, ca, cb) = (a.shape()[0], a.shape()[1], b.shape()[1]);
    let mut data = Vec::with_capacity(n * (ca + cb));
    for i in 0..n {
        data.extend_from_slice(&a.data()[i * ca..(i + 1) * ca]);
        data.extend_from_slice(&b.data()[i * cb..(i + 1) * cb]);
    }
    Tensor::new(vec![n, ca + cb], data)
}

/// In-place logistic function, for turning decoder logits into intensities.
pub fn sigmoid_inplace<T: Scalar>(t: &mut Tensor<T>) {
    for v in t.data_mut() {
        *v = T::one() / (T::one() + (-*v).exp());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_rejects_mismatched_data() {
        let err = Tensor::<f32>::new(vec![2, 3], vec![0.0; 5]).unwrap_err();
        assert!(matches!(err, TensorError::ShapeDataMismatch { .. }));
    }

    #[test]
    fn scalar_tensor_is_rank_zero() {
        let t = Tensor::<f32>::scalar(3.5);
        assert!(t.is_scalar());
        assert_eq!(t.item(), 3.5);
        assert_eq!(t.shape(), &[] as &[usize]);
    }

    #[test]
    fn reshape_preserves_elements() {
        let t = Tensor::<f32>::new(vec![2, 3], (0..6).map(|i| i as f32).collect()).unwrap();
        let r = t.reshape(&[3, 2]).unwrap();
        assert_eq!(r.data(), t.data());
        assert!(t.reshape(&[4, 2]).is_err());
    }

    #[test]
    fn grad_accumulates_across_calls() {
        let mut t = Tensor::<f32>::zeros(&[3]);
        t.accumulate_grad(&[1.0, 2.0, 3.0]);
        t.accumulate_grad(&[1.0, 1.0, 1.0]);
        assert_eq!(t.grad.as_deref().unwrap(), &[2.0, 3.0, 4.0]);
        t.zero_grad();
        assert_eq!(t.grad.as_deref().unwrap(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn concat_cols_stitches_rows() {
        let a = Tensor::<f32>::new(vec![2, 2], vec![1.0, 2.0, 5.0, 6.0]).unwrap();
        let b = Tensor::<f32>::new(vec![2, 1], vec![3.0, 7.0]).unwrap();
        let c = concat_cols(&a, &b).unwrap();
        assert_eq!(c.shape(), &[2, 3]);
        assert_eq!(c.data(), &[1.0, 2.0, 3.0, 5.0, 6.0, 7.0]);
    }
}
