//! Forward ops and their backward rules.
//!
//! Each op validates shapes, computes its output, and registers a closure
//! that routes the output gradient back to the inputs. Ops are grouped by
//! kind; all of them live on [`crate::tape::Tape`].

mod conv;
mod linalg;
mod pointwise;
mod reduce;
mod shape;

pub use conv::{conv2d_out_size, conv_transpose2d_out_size};

use crate::error::{Error, Result};
use crate::tape::Tape;
use crate::tensor::Tensor;

impl Tape {
    pub(crate) fn same_shape(
        &self,
        op: &'static str,
        a: crate::tape::TensorRef,
        b: crate::tape::TensorRef,
    ) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::ShapeMismatch {
                op,
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        Ok(())
    }
}

pub(crate) fn tensor_like(shape: &[usize], data: Vec<f32>) -> Tensor {
    Tensor::from_vec(shape.to_vec(), data).expect("op produced data matching its shape")
}
