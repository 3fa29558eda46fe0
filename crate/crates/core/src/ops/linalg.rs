//! Matrix multiply.

use crate::error::{Error, Result};
use crate::gemm::sgemm;
use crate::tape::{with_grad, Tape, TensorRef};

use super::tensor_like;

impl Tape {
    /// 2-D matrix product: (m, k) x (k, n) -> (m, n).
    pub fn matmul(&mut self, a: TensorRef, b: TensorRef) -> Result<TensorRef> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                lhs: sa,
                rhs: sb,
            });
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut data = vec![0.0f32; m * n];
        sgemm(
            m,
            k,
            n,
            1.0,
            self.value(a).data(),
            false,
            self.value(b).data(),
            false,
            0.0,
            &mut data,
        );
        let out = tensor_like(&[m, n], data);
        let (ia, ib) = (a.0, b.0);
        self.push_op("matmul", out, &[a, b], move |vals, go, grads| {
            // dA = dY B^T, dB = A^T dY
            with_grad(grads, ia, |slot| {
                sgemm(m, n, k, 1.0, go, false, vals[ib].data(), true, 1.0, slot);
            });
            with_grad(grads, ib, |slot| {
                sgemm(k, m, n, 1.0, vals[ia].data(), true, go, false, 1.0, slot);
            });
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    /// Naive triple loop used as the value oracle.
    fn matmul_naive(a: &[f32], b: &[f32], m: usize, k: usize, n: usize) -> Vec<f32> {
        let mut c = vec![0.0f32; m * n];
        for i in 0..m {
            for j in 0..n {
                let mut s = 0.0;
                for l in 0..k {
                    s += a[i * k + l] * b[l * n + j];
                }
                c[i * n + j] = s;
            }
        }
        c
    }

    #[test]
    fn matches_naive_2x3_3x2() {
        let a = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let b = vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0];
        let mut t = Tape::new();
        let ra = t.leaf(Tensor::from_vec(vec![2, 3], a.clone()).unwrap(), false);
        let rb = t.leaf(Tensor::from_vec(vec![3, 2], b.clone()).unwrap(), false);
        let rc = t.matmul(ra, rb).unwrap();
        assert_eq!(t.value(rc).data(), matmul_naive(&a, &b, 2, 3, 2).as_slice());
    }

    #[test]
    fn inner_dim_mismatch_rejected() {
        let mut t = Tape::new();
        let a = t.leaf(Tensor::zeros(vec![2, 3]), false);
        let b = t.leaf(Tensor::zeros(vec![2, 2]), false);
        let err = t.matmul(a, b).unwrap_err().to_string();
        assert!(err.contains("matmul"), "{err}");
    }

    #[test]
    fn gradient_of_quadratic_form() {
        // loss = sum(A B), dA = 1 * B^T broadcast, dB = A^T * 1
        let mut t = Tape::new();
        let a = t.leaf(Tensor::from_vec(vec![1, 2], vec![2.0, 3.0]).unwrap(), true);
        let b = t.leaf(Tensor::from_vec(vec![2, 1], vec![5.0, 7.0]).unwrap(), true);
        let c = t.matmul(a, b).unwrap();
        let loss = t.sum(c).unwrap();
        t.backward(loss).unwrap();
        assert_eq!(t.grad(a).unwrap(), &[5.0, 7.0]);
        assert_eq!(t.grad(b).unwrap(), &[2.0, 3.0]);
    }
}
