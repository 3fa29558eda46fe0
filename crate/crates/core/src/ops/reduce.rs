//! Reductions. Scalars accumulate in f64 to limit drift.

use crate::error::{Error, Result};
use crate::tape::{with_grad, Tape, TensorRef};
use crate::tensor::Tensor;

use super::tensor_like;

impl Tape {
    /// Sum of all elements, as a scalar.
    pub fn sum(&mut self, a: TensorRef) -> Result<TensorRef> {
        let total: f64 = self.value(a).data().iter().map(|&v| v as f64).sum();
        let out = Tensor::scalar(total as f32);
        let ia = a.0;
        self.push_op("sum", out, &[a], move |_vals, go, grads| {
            let g = go[0];
            with_grad(grads, ia, |slot| {
                for s in slot {
                    *s += g;
                }
            });
        })
    }

    /// Arithmetic mean of all elements, as a scalar.
    pub fn mean(&mut self, a: TensorRef) -> Result<TensorRef> {
        let n = self.value(a).numel();
        let total: f64 = self.value(a).data().iter().map(|&v| v as f64).sum();
        let out = Tensor::scalar((total / n as f64) as f32);
        let ia = a.0;
        let inv = 1.0 / n as f32;
        self.push_op("mean", out, &[a], move |_vals, go, grads| {
            let g = go[0] * inv;
            with_grad(grads, ia, |slot| {
                for s in slot {
                    *s += g;
                }
            });
        })
    }

    /// Sum over the given axes, keeping them as size-1 dims.
    pub fn sum_axes(&mut self, a: TensorRef, axes: &[usize]) -> Result<TensorRef> {
        let shape = self.shape(a).to_vec();
        for &ax in axes {
            if ax >= shape.len() {
                return Err(Error::invalid(
                    "sum_axes",
                    format!("axis {ax} out of range for shape {shape:?}"),
                ));
            }
        }
        let mut out_shape = shape.clone();
        for &ax in axes {
            out_shape[ax] = 1;
        }
        let out_numel: usize = out_shape.iter().product();

        // Map each input index to its output slot once; reused in backward.
        let strides = row_major_strides(&shape);
        let out_strides = row_major_strides(&out_shape);
        let reduced: Vec<bool> = (0..shape.len()).map(|d| axes.contains(&d)).collect();
        let numel = self.value(a).numel();
        let mut slots = Vec::with_capacity(numel);
        for flat in 0..numel {
            let mut rem = flat;
            let mut slot = 0;
            for d in 0..strides.len() {
                let idx = rem / strides[d];
                rem %= strides[d];
                if !reduced[d] {
                    slot += idx * out_strides[d];
                }
            }
            slots.push(slot as u32);
        }

        let mut acc = vec![0.0f64; out_numel];
        for (&v, &slot) in self.value(a).data().iter().zip(&slots) {
            acc[slot as usize] += v as f64;
        }
        let out = tensor_like(&out_shape, acc.into_iter().map(|v| v as f32).collect());
        let ia = a.0;
        self.push_op("sum_axes", out, &[a], move |_vals, go, grads| {
            with_grad(grads, ia, |slot| {
                for (s, &j) in slot.iter_mut().zip(&slots) {
                    *s += go[j as usize];
                }
            });
        })
    }

    /// Mean over the given axes, keeping them as size-1 dims.
    pub fn mean_axes(&mut self, a: TensorRef, axes: &[usize]) -> Result<TensorRef> {
        let shape = self.shape(a).to_vec();
        let summed = self.sum_axes(a, axes)?;
        let count: usize = axes
            .iter()
            .map(|&ax| shape.get(ax).copied().unwrap_or(1))
            .product();
        self.mul_scalar(summed, 1.0 / count as f32)
    }
}

pub(crate) fn row_major_strides(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; shape.len()];
    for d in (0..shape.len().saturating_sub(1)).rev() {
        strides[d] = strides[d + 1] * shape[d + 1];
    }
    strides
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_backward_is_all_ones() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::from_vec(vec![3], vec![1.0, 2.0, 3.0]).unwrap(), true);
        let s = t.sum(x).unwrap();
        assert_eq!(t.value(s).item(), 6.0);
        t.backward(s).unwrap();
        assert_eq!(t.grad(x).unwrap(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn mean_matches_sum_over_n() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::from_vec(vec![4], vec![1.0, 2.0, 3.0, 6.0]).unwrap(), true);
        let m = t.mean(x).unwrap();
        assert_eq!(t.value(m).item(), 3.0);
        t.backward(m).unwrap();
        assert_eq!(t.grad(x).unwrap(), &[0.25; 4]);
    }

    #[test]
    fn sum_axes_keeps_dims() {
        let mut t = Tape::new();
        // shape (2, 3): rows [1 2 3; 4 5 6]
        let x = t.leaf(
            Tensor::from_vec(vec![2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap(),
            true,
        );
        let s = t.sum_axes(x, &[1]).unwrap();
        assert_eq!(t.shape(s), &[2, 1]);
        assert_eq!(t.value(s).data(), &[6.0, 15.0]);

        let m = t.mean_axes(x, &[0]).unwrap();
        assert_eq!(t.shape(m), &[1, 3]);
        assert_eq!(t.value(m).data(), &[2.5, 3.5, 4.5]);
    }

    #[test]
    fn sum_axes_gradient_broadcasts_back() {
        let mut t = Tape::new();
        let x = t.leaf(
            Tensor::from_vec(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap(),
            true,
        );
        let s = t.sum_axes(x, &[0]).unwrap(); // shape (1,2): [4, 6]
        let w = t.leaf(Tensor::from_vec(vec![1, 2], vec![10.0, 100.0]).unwrap(), false);
        let p = t.mul(s, w).unwrap();
        let loss = t.sum(p).unwrap();
        t.backward(loss).unwrap();
        assert_eq!(t.grad(x).unwrap(), &[10.0, 100.0, 10.0, 100.0]);
    }
}
