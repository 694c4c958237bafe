//! Dense row-major `f64` tensors with reverse-mode autodiff.
//!
//! A [`Tensor`] is a cheap handle (`Rc`) to a node in a dynamically built
//! computation graph. Ops record their operands inside the node; calling
//! [`Tensor::backward`] on a scalar walks the graph once in reverse
//! topological order and accumulates gradients into every `requires_grad`
//! leaf it can reach. Gradients accumulate across calls until
//! [`Tensor::zero_grad`] resets them, which is what lets a training step sum
//! per-sample losses before one optimizer update.
//!
//! The engine is deliberately single-threaded and allocation-only: node ids
//! come from a global counter, reductions run in a fixed order, and no op
//! depends on pointer identity, so a fixed seed reproduces runs bit for bit.

use alloc::rc::Rc;
use alloc::vec::Vec;
use core::cell::{Ref, RefCell, RefMut};
use core::sync::atomic::{AtomicU64, Ordering};

use crate::autograd::{run_backward, Op};
use crate::error::{Error, Result};

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

pub(crate) struct TensorInner {
    pub(crate) id: u64,
    pub(crate) shape: Vec<usize>,
    pub(crate) data: RefCell<Vec<f64>>,
    pub(crate) grad: RefCell<Option<Vec<f64>>>,
    pub(crate) requires_grad: bool,
    /// `Some` only while the node participates in a backward graph; outputs
    /// of ops over untracked inputs drop their parents immediately.
    pub(crate) op: Option<Op>,
    /// True when this node or any ancestor requires a gradient.
    pub(crate) tracked: bool,
}

/// Handle to one node of the computation graph.
#[derive(Clone)]
pub struct Tensor {
    pub(crate) inner: Rc<TensorInner>,
}

fn check_payload(op: &'static str, data: &[f64], shape: &[usize]) -> Result<()> {
    let expected: usize = shape.iter().product();
    if expected != data.len() {
        return Err(Error::LengthMismatch { op, expected, actual: data.len() });
    }
    for (index, &value) in data.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFiniteValue { op, index, value });
        }
    }
    Ok(())
}

impl Tensor {
    /// Creates a constant leaf. Rejects data/shape length mismatches and
    /// non-finite values.
    pub fn new(data: Vec<f64>, shape: &[usize]) -> Result<Tensor> {
        check_payload("Tensor::new", &data, shape)?;
        Ok(Self::leaf(data, shape.to_vec(), false))
    }

    /// Creates a trainable leaf (`requires_grad = true`).
    pub fn param(data: Vec<f64>, shape: &[usize]) -> Result<Tensor> {
        check_payload("Tensor::param", &data, shape)?;
        Ok(Self::leaf(data, shape.to_vec(), true))
    }

    /// Creates a zero-filled constant leaf.
    pub fn zeros(shape: &[usize]) -> Tensor {
        let len = shape.iter().product();
        Self::leaf(alloc::vec![0.0; len], shape.to_vec(), false)
    }

    /// Creates a shape-`[1]` constant leaf.
    pub fn scalar(value: f64) -> Result<Tensor> {
        Tensor::new(alloc::vec![value], &[1])
    }

    pub(crate) fn leaf(data: Vec<f64>, shape: Vec<usize>, requires_grad: bool) -> Tensor {
        Tensor {
            inner: Rc::new(TensorInner {
                id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
                shape,
                data: RefCell::new(data),
                grad: RefCell::new(None),
                requires_grad,
                op: None,
                tracked: requires_grad,
            }),
        }
    }

    /// Creates an op output. Ops over untracked inputs skip graph recording
    /// entirely so inference never retains activations.
    pub(crate) fn from_op(data: Vec<f64>, shape: Vec<usize>, op: Op) -> Tensor {
        let tracked = op.parents().iter().any(|p| p.is_tracked());
        Tensor {
            inner: Rc::new(TensorInner {
                id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
                shape,
                data: RefCell::new(data),
                grad: RefCell::new(None),
                requires_grad: false,
                op: tracked.then_some(op),
                tracked,
            }),
        }
    }

    pub(crate) fn id(&self) -> u64 {
        self.inner.id
    }

    pub fn shape(&self) -> &[usize] {
        &self.inner.shape
    }

    pub fn numel(&self) -> usize {
        self.inner.shape.iter().product()
    }

    pub fn requires_grad(&self) -> bool {
        self.inner.requires_grad
    }

    pub(crate) fn is_tracked(&self) -> bool {
        self.inner.tracked
    }

    pub(crate) fn op(&self) -> Option<&Op> {
        self.inner.op.as_ref()
    }

    /// Borrows the underlying buffer (row-major).
    pub fn data(&self) -> Ref<'_, Vec<f64>> {
        self.inner.data.borrow()
    }

    /// Mutable access for in-place parameter updates and finite-difference
    /// probes. Callers are responsible for keeping values finite.
    pub(crate) fn data_mut(&self) -> RefMut<'_, Vec<f64>> {
        self.inner.data.borrow_mut()
    }

    /// Copies the buffer out.
    pub fn to_vec(&self) -> Vec<f64> {
        self.inner.data.borrow().clone()
    }

    /// Returns the single element of a scalar tensor.
    ///
    /// # Panics
    /// Panics when the tensor has more than one element; that is an engine
    /// usage bug, not a data error.
    pub fn item(&self) -> f64 {
        let data = self.inner.data.borrow();
        assert!(data.len() == 1, "item() on tensor of shape {:?}", self.inner.shape);
        data[0]
    }

    /// Replaces the buffer, enforcing the same invariants as construction.
    pub fn set_data(&self, data: Vec<f64>) -> Result<()> {
        check_payload("Tensor::set_data", &data, &self.inner.shape)?;
        *self.inner.data.borrow_mut() = data;
        Ok(())
    }

    /// Clones the accumulated gradient, if any.
    pub fn grad(&self) -> Option<Vec<f64>> {
        self.inner.grad.borrow().clone()
    }

    /// Clears the accumulated gradient.
    pub fn zero_grad(&self) {
        *self.inner.grad.borrow_mut() = None;
    }

    pub(crate) fn accumulate_grad(&self, delta: &[f64]) {
        assert_eq!(
            delta.len(),
            self.numel(),
            "gradient length must match tensor size"
        );
        let mut slot = self.inner.grad.borrow_mut();
        match slot.as_mut() {
            Some(grad) => {
                for (g, d) in grad.iter_mut().zip(delta) {
                    *g += d;
                }
            }
            None => *slot = Some(delta.to_vec()),
        }
    }

    /// Reverse-mode sweep from a scalar loss.
    ///
    /// Accumulates into the `grad` of every `requires_grad` tensor reachable
    /// from `self`; calling twice without [`Tensor::zero_grad`] doubles the
    /// gradients. Intermediate buffers are transient and freed on return.
    pub fn backward(&self) -> Result<()> {
        if self.numel() != 1 {
            return Err(Error::NonScalarBackward { shape: self.inner.shape.clone() });
        }
        run_backward(self);
        Ok(())
    }
}

impl core::fmt::Debug for Tensor {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.inner.shape)
            .field("requires_grad", &self.inner.requires_grad)
            .finish()
    }
}
