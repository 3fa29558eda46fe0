//! Reverse-mode automatic differentiation over a recorded tape.
//!
//! A [`Tape`] owns every tensor produced during one forward pass. Ops append
//! their output as a node and, when any input participates in gradients,
//! record a backward rule. [`Tape::backward`] replays the rules in reverse
//! order, accumulating gradients into the nodes that asked for them.
//!
//! The tape is confined to one thread; the tensors it hands out are
//! immutable and freely shareable.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Handle to a node on a specific tape.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct TensorRef(pub(crate) usize);

/// Gradient slots for all nodes; `None` means "gradient not tracked".
pub(crate) type GradSlots = [Option<Vec<f32>>];

/// Backward rule: receives node values, the output gradient, and the
/// gradient slots to accumulate into.
pub(crate) type BackwardFn = Box<dyn Fn(&[Tensor], &[f32], &mut GradSlots)>;

pub(crate) struct Recorded {
    pub out: usize,
    pub inputs: Vec<usize>,
    pub backward: BackwardFn,
}

#[derive(Default)]
pub struct Tape {
    pub(crate) values: Vec<Tensor>,
    pub(crate) needs: Vec<bool>,
    pub(crate) grads: Vec<Option<Vec<f32>>>,
    pub(crate) ops: Vec<Recorded>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    /// Inserts a leaf tensor. `requires_grad` leaves receive gradients
    /// from [`Tape::backward`].
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> TensorRef {
        self.values.push(value);
        self.needs.push(requires_grad);
        self.grads.push(None);
        TensorRef(self.values.len() - 1)
    }

    /// Leaf that never receives a gradient (inputs, masks, targets).
    pub fn constant(&mut self, value: Tensor) -> TensorRef {
        self.leaf(value, false)
    }

    /// Re-inserts the value of `r` as a fresh constant, cutting the
    /// gradient path (stop-gradient).
    pub fn detach(&mut self, r: TensorRef) -> TensorRef {
        let v = self.values[r.0].clone();
        self.constant(v)
    }

    pub fn value(&self, r: TensorRef) -> &Tensor {
        &self.values[r.0]
    }

    pub fn shape(&self, r: TensorRef) -> &[usize] {
        self.values[r.0].shape()
    }

    /// Gradient of the last `backward` call w.r.t. `r`, if tracked.
    pub fn grad(&self, r: TensorRef) -> Option<&[f32]> {
        self.grads[r.0].as_deref()
    }

    pub fn num_nodes(&self) -> usize {
        self.values.len()
    }

    pub(crate) fn requires(&self, inputs: &[TensorRef]) -> bool {
        inputs.iter().any(|r| self.needs[r.0])
    }

    /// Appends an op output; records `backward` only when some input
    /// tracks gradients. Every output is checked for non-finite values.
    pub(crate) fn push_op(
        &mut self,
        op: &'static str,
        value: Tensor,
        inputs: &[TensorRef],
        backward: impl Fn(&[Tensor], &[f32], &mut GradSlots) + 'static,
    ) -> Result<TensorRef> {
        if !value.is_finite() {
            return Err(Error::NonFinite { op });
        }
        let needs = self.requires(inputs);
        let out = self.leaf(value, needs);
        if needs {
            self.ops.push(Recorded {
                out: out.0,
                inputs: inputs.iter().map(|r| r.0).collect(),
                backward: Box::new(backward),
            });
        }
        Ok(out)
    }

    /// Populates gradients of every tracked node with d(loss)/d(node).
    pub fn backward(&mut self, loss: TensorRef) -> Result<()> {
        if self.values[loss.0].numel() != 1 {
            return Err(Error::invalid(
                "backward",
                format!("loss must be scalar, got shape {:?}", self.shape(loss)),
            ));
        }
        if self.ops.is_empty() {
            return Err(Error::invalid("backward", "tape is empty"));
        }
        for (i, slot) in self.grads.iter_mut().enumerate() {
            *slot = if self.needs[i] {
                Some(vec![0.0; self.values[i].numel()])
            } else {
                None
            };
        }
        if let Some(g) = &mut self.grads[loss.0] {
            g[0] = 1.0;
        }
        for op in self.ops.iter().rev() {
            let go = match self.grads[op.out].take() {
                Some(g) => g,
                None => continue,
            };
            // Nodes whose gradient never received a contribution are dead
            // branches; skip their rules.
            if go.iter().any(|v| *v != 0.0) {
                (op.backward)(&self.values, &go, &mut self.grads);
            }
            self.grads[op.out] = Some(go);
        }
        Ok(())
    }

    /// True when `node`'s value was computed (directly or transitively)
    /// from `ancestor`. Used by structural tests on the graph.
    pub fn depends_on(&self, node: TensorRef, ancestor: TensorRef) -> bool {
        if node == ancestor {
            return true;
        }
        let mut reach = vec![false; self.values.len()];
        reach[ancestor.0] = true;
        // Ops are recorded in topological order.
        for op in &self.ops {
            if op.inputs.iter().any(|&i| reach[i]) {
                reach[op.out] = true;
            }
        }
        reach[node.0]
    }
}

/// Adds `delta` into the gradient slot of node `id` if it is tracked.
pub(crate) fn accumulate(grads: &mut GradSlots, id: usize, delta: impl Iterator<Item = f32>) {
    if let Some(g) = grads[id].as_mut() {
        for (slot, d) in g.iter_mut().zip(delta) {
            *slot += d;
        }
    }
}

/// Runs `f` over the gradient slot of node `id` if it is tracked.
pub(crate) fn with_grad(grads: &mut GradSlots, id: usize, f: impl FnOnce(&mut [f32])) {
    if let Some(g) = grads[id].as_mut() {
        f(g);
    }
}
