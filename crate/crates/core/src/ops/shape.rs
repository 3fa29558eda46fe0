//! Shape manipulation: broadcast, slice, concat, reshape.

use crate::error::{Error, Result};
use crate::tape::{accumulate, with_grad, Tape, TensorRef};

use super::reduce::row_major_strides;
use super::tensor_like;

impl Tape {
    /// Broadcasts `a` to `target`, NumPy-style: shapes align on trailing
    /// dims and each dim of `a` must equal the target or be 1.
    pub fn broadcast_to(&mut self, a: TensorRef, target: &[usize]) -> Result<TensorRef> {
        let src = self.shape(a).to_vec();
        if src.len() > target.len() {
            return Err(Error::ShapeMismatch {
                op: "broadcast",
                lhs: src,
                rhs: target.to_vec(),
            });
        }
        // Left-pad the source with 1s.
        let mut padded = vec![1usize; target.len() - src.len()];
        padded.extend_from_slice(&src);
        for (s, t) in padded.iter().zip(target) {
            if *s != *t && *s != 1 {
                return Err(Error::ShapeMismatch {
                    op: "broadcast",
                    lhs: src,
                    rhs: target.to_vec(),
                });
            }
        }
        if padded == target {
            return self.reshape(a, target.to_vec());
        }

        let out_numel: usize = target.iter().product();
        let src_strides = row_major_strides(&padded);
        let out_strides = row_major_strides(target);
        // Source element feeding each output slot; also drives backward.
        let mut origin = Vec::with_capacity(out_numel);
        for flat in 0..out_numel {
            let mut rem = flat;
            let mut si = 0;
            for d in 0..target.len() {
                let idx = rem / out_strides[d];
                rem %= out_strides[d];
                if padded[d] != 1 {
                    si += idx * src_strides[d];
                }
            }
            origin.push(si as u32);
        }
        let src_data = self.value(a).data();
        let data: Vec<f32> = origin.iter().map(|&si| src_data[si as usize]).collect();
        let out = tensor_like(target, data);
        let ia = a.0;
        self.push_op("broadcast", out, &[a], move |_vals, go, grads| {
            with_grad(grads, ia, |slot| {
                for (&g, &si) in go.iter().zip(&origin) {
                    slot[si as usize] += g;
                }
            });
        })
    }

    /// Same data, new shape (same element count).
    pub fn reshape(&mut self, a: TensorRef, shape: Vec<usize>) -> Result<TensorRef> {
        let out = self.value(a).reshaped(shape)?;
        let ia = a.0;
        self.push_op("reshape", out, &[a], move |_vals, go, grads| {
            accumulate(grads, ia, go.iter().copied());
        })
    }

    /// Narrow along `axis`: keeps `len` indices starting at `start`.
    pub fn slice(&mut self, a: TensorRef, axis: usize, start: usize, len: usize) -> Result<TensorRef> {
        let shape = self.shape(a).to_vec();
        if axis >= shape.len() || start + len > shape[axis] || len == 0 {
            return Err(Error::invalid(
                "slice",
                format!("range {start}..{} out of bounds on axis {axis} of {shape:?}", start + len),
            ));
        }
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let mut out_shape = shape.clone();
        out_shape[axis] = len;

        let src = self.value(a).data();
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * shape[axis] + start) * inner;
            data.extend_from_slice(&src[base..base + len * inner]);
        }
        let out = tensor_like(&out_shape, data);
        let ia = a.0;
        let dim = shape[axis];
        self.push_op("slice", out, &[a], move |_vals, go, grads| {
            with_grad(grads, ia, |slot| {
                for o in 0..outer {
                    let dst = (o * dim + start) * inner;
                    let srcg = o * len * inner;
                    for i in 0..len * inner {
                        slot[dst + i] += go[srcg + i];
                    }
                }
            });
        })
    }

    /// Concatenates along `axis`; all other dims must agree.
    pub fn concat(&mut self, parts: &[TensorRef], axis: usize) -> Result<TensorRef> {
        if parts.is_empty() {
            return Err(Error::invalid("concat", "no tensors given"));
        }
        let first = self.shape(parts[0]).to_vec();
        if axis >= first.len() {
            return Err(Error::invalid(
                "concat",
                format!("axis {axis} out of range for shape {first:?}"),
            ));
        }
        let mut axis_total = 0;
        for &p in parts {
            let s = self.shape(p);
            let compatible = s.len() == first.len()
                && s.iter()
                    .zip(&first)
                    .enumerate()
                    .all(|(d, (a, b))| d == axis || a == b);
            if !compatible {
                return Err(Error::ShapeMismatch {
                    op: "concat",
                    lhs: first,
                    rhs: s.to_vec(),
                });
            }
            axis_total += s[axis];
        }
        let outer: usize = first[..axis].iter().product();
        let inner: usize = first[axis + 1..].iter().product();
        let mut out_shape = first.clone();
        out_shape[axis] = axis_total;

        let mut data = vec![0.0f32; outer * axis_total * inner];
        let mut offset = 0;
        let mut spans = Vec::with_capacity(parts.len());
        for &p in parts {
            let dim = self.shape(p)[axis];
            let src = self.value(p).data();
            for o in 0..outer {
                let dst = (o * axis_total + offset) * inner;
                let s = o * dim * inner;
                data[dst..dst + dim * inner].copy_from_slice(&src[s..s + dim * inner]);
            }
            spans.push((p.0, offset, dim));
            offset += dim;
        }
        let out = tensor_like(&out_shape, data);
        self.push_op("concat", out, parts, move |_vals, go, grads| {
            for &(id, off, dim) in &spans {
                with_grad(grads, id, |slot| {
                    for o in 0..outer {
                        let src = (o * axis_total + off) * inner;
                        let dst = o * dim * inner;
                        for i in 0..dim * inner {
                            slot[dst + i] += go[src + i];
                        }
                    }
                });
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    #[test]
    fn broadcast_bias_over_batch() {
        let mut t = Tape::new();
        // bias (1,2,1) -> (2,2,2)
        let b = t.leaf(Tensor::from_vec(vec![1, 2, 1], vec![10.0, 20.0]).unwrap(), true);
        let big = t.broadcast_to(b, &[2, 2, 2]).unwrap();
        assert_eq!(
            t.value(big).data(),
            &[10.0, 10.0, 20.0, 20.0, 10.0, 10.0, 20.0, 20.0]
        );
        let loss = t.sum(big).unwrap();
        t.backward(loss).unwrap();
        assert_eq!(t.grad(b).unwrap(), &[4.0, 4.0]);
    }

    #[test]
    fn broadcast_rejects_incompatible() {
        let mut t = Tape::new();
        let b = t.leaf(Tensor::from_vec(vec![3], vec![1.0, 2.0, 3.0]).unwrap(), false);
        assert!(t.broadcast_to(b, &[2, 2]).is_err());
    }

    #[test]
    fn slice_and_concat_roundtrip() {
        let mut t = Tape::new();
        let x = t.leaf(
            Tensor::from_vec(vec![2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap(),
            true,
        );
        let left = t.slice(x, 1, 0, 1).unwrap();
        let right = t.slice(x, 1, 1, 2).unwrap();
        assert_eq!(t.value(left).data(), &[1.0, 4.0]);
        assert_eq!(t.value(right).data(), &[2.0, 3.0, 5.0, 6.0]);
        let back = t.concat(&[left, right], 1).unwrap();
        assert_eq!(t.value(back).data(), t.value(x).data());

        let w = t.leaf(
            Tensor::from_vec(vec![2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap(),
            false,
        );
        let prod = t.mul(back, w).unwrap();
        let loss = t.sum(prod).unwrap();
        t.backward(loss).unwrap();
        assert_eq!(t.grad(x).unwrap(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn concat_shape_check() {
        let mut t = Tape::new();
        let a = t.leaf(Tensor::zeros(vec![2, 3]), false);
        let b = t.leaf(Tensor::zeros(vec![3, 3]), false);
        assert!(t.concat(&[a, b], 1).is_err());
        assert!(t.concat(&[a, b], 0).is_ok());
    }
}
