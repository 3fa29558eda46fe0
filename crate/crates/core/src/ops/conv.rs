//! 2-D convolution, transposed convolution, and nearest upsampling.
//!
//! Convolutions run as per-sample im2col + gemm. Backward recomputes the
//! column buffer instead of caching it; at these sizes the gemm dominates.

use crate::error::{Error, Result};
use crate::gemm::sgemm;
use crate::tape::{with_grad, Tape, TensorRef};

use super::tensor_like;

/// Spatial output size of conv2d with the given geometry.
pub fn conv2d_out_size(h: usize, w: usize, kh: usize, kw: usize, stride: usize, pad: usize) -> (usize, usize) {
    ((h + 2 * pad - kh) / stride + 1, (w + 2 * pad - kw) / stride + 1)
}

/// Spatial output size of conv_transpose2d with the given geometry.
pub fn conv_transpose2d_out_size(
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
) -> (usize, usize) {
    ((h - 1) * stride + kh - 2 * pad, (w - 1) * stride + kw - 2 * pad)
}

/// Geometry of one conv application on a single image.
#[derive(Clone, Copy)]
struct Geom {
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
}

impl Geom {
    fn cols_len(&self) -> usize {
        self.c * self.kh * self.kw * self.oh * self.ow
    }
}

/// Unfolds `img` (C,H,W) into `cols` (C*KH*KW, OH*OW).
fn im2col(img: &[f32], g: Geom, cols: &mut [f32]) {
    let spatial = g.oh * g.ow;
    for c in 0..g.c {
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = ((c * g.kh + ki) * g.kw + kj) * spatial;
                for oi in 0..g.oh {
                    let iy = (oi * g.stride + ki) as isize - g.pad as isize;
                    let dst = row + oi * g.ow;
                    if iy < 0 || iy >= g.h as isize {
                        cols[dst..dst + g.ow].fill(0.0);
                        continue;
                    }
                    let src = (c * g.h + iy as usize) * g.w;
                    for oj in 0..g.ow {
                        let ix = (oj * g.stride + kj) as isize - g.pad as isize;
                        cols[dst + oj] = if ix < 0 || ix >= g.w as isize {
                            0.0
                        } else {
                            img[src + ix as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatter-adds `cols` back into `img`.
fn col2im_add(cols: &[f32], g: Geom, img: &mut [f32]) {
    let spatial = g.oh * g.ow;
    for c in 0..g.c {
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = ((c * g.kh + ki) * g.kw + kj) * spatial;
                for oi in 0..g.oh {
                    let iy = (oi * g.stride + ki) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let dst = (c * g.h + iy as usize) * g.w;
                    let src = row + oi * g.ow;
                    for oj in 0..g.ow {
                        let ix = (oj * g.stride + kj) as isize - g.pad as isize;
                        if ix >= 0 && ix < g.w as isize {
                            img[dst + ix as usize] += cols[src + oj];
                        }
                    }
                }
            }
        }
    }
}

impl Tape {
    /// conv2d: x (N,Cin,H,W) * w (Cout,Cin,KH,KW) -> (N,Cout,OH,OW).
    pub fn conv2d(&mut self, x: TensorRef, w: TensorRef, stride: usize, pad: usize) -> Result<TensorRef> {
        let sx = self.shape(x).to_vec();
        let sw = self.shape(w).to_vec();
        if sx.len() != 4 || sw.len() != 4 || sx[1] != sw[1] {
            return Err(Error::ShapeMismatch { op: "conv2d", lhs: sx, rhs: sw });
        }
        if stride == 0 {
            return Err(Error::invalid("conv2d", "stride must be positive"));
        }
        let (n, cin, h, wd) = (sx[0], sx[1], sx[2], sx[3]);
        let (cout, kh, kw) = (sw[0], sw[2], sw[3]);
        if kh > h + 2 * pad || kw > wd + 2 * pad {
            return Err(Error::ShapeMismatch { op: "conv2d", lhs: sx, rhs: sw });
        }
        let (oh, ow) = conv2d_out_size(h, wd, kh, kw, stride, pad);
        let g = Geom { c: cin, h, w: wd, kh, kw, stride, pad, oh, ow };
        let ckk = cin * kh * kw;
        let spatial = oh * ow;

        let mut cols = vec![0.0f32; g.cols_len()];
        let mut data = vec![0.0f32; n * cout * spatial];
        {
            let xv = self.value(x).data();
            let wv = self.value(w).data();
            for i in 0..n {
                im2col(&xv[i * cin * h * wd..(i + 1) * cin * h * wd], g, &mut cols);
                sgemm(
                    cout,
                    ckk,
                    spatial,
                    1.0,
                    wv,
                    false,
                    &cols,
                    false,
                    0.0,
                    &mut data[i * cout * spatial..(i + 1) * cout * spatial],
                );
            }
        }
        let out = tensor_like(&[n, cout, oh, ow], data);
        let (ix, iw) = (x.0, w.0);
        self.push_op("conv2d", out, &[x, w], move |vals, go, grads| {
            let xv = vals[ix].data();
            let wv = vals[iw].data();
            let mut cols = vec![0.0f32; g.cols_len()];
            for i in 0..n {
                let go_n = &go[i * cout * spatial..(i + 1) * cout * spatial];
                let has_w = grads[iw].is_some();
                let has_x = grads[ix].is_some();
                if has_w {
                    im2col(&xv[i * cin * h * wd..(i + 1) * cin * h * wd], g, &mut cols);
                    with_grad(grads, iw, |dw| {
                        // dW += dY_n cols^T
                        sgemm(cout, spatial, ckk, 1.0, go_n, false, &cols, true, 1.0, dw);
                    });
                }
                if has_x {
                    // dcols = W^T dY_n, then fold back into the image
                    let mut dcols = vec![0.0f32; g.cols_len()];
                    sgemm(ckk, cout, spatial, 1.0, wv, true, go_n, false, 0.0, &mut dcols);
                    with_grad(grads, ix, |dx| {
                        col2im_add(&dcols, g, &mut dx[i * cin * h * wd..(i + 1) * cin * h * wd]);
                    });
                }
            }
        })
    }

    /// conv_transpose2d: x (N,Cin,H,W) * w (Cin,Cout,KH,KW) -> (N,Cout,OH,OW)
    /// with OH = (H-1)*stride + KH - 2*pad. Adjoint of [`Tape::conv2d`].
    pub fn conv_transpose2d(
        &mut self,
        x: TensorRef,
        w: TensorRef,
        stride: usize,
        pad: usize,
    ) -> Result<TensorRef> {
        let sx = self.shape(x).to_vec();
        let sw = self.shape(w).to_vec();
        if sx.len() != 4 || sw.len() != 4 || sx[1] != sw[0] {
            return Err(Error::ShapeMismatch { op: "conv_transpose2d", lhs: sx, rhs: sw });
        }
        if stride == 0 {
            return Err(Error::invalid("conv_transpose2d", "stride must be positive"));
        }
        let (n, cin, h, wd) = (sx[0], sx[1], sx[2], sx[3]);
        let (cout, kh, kw) = (sw[1], sw[2], sw[3]);
        if (h - 1) * stride + kh <= 2 * pad {
            return Err(Error::invalid("conv_transpose2d", "padding swallows the whole output"));
        }
        let (oh, ow) = conv_transpose2d_out_size(h, wd, kh, kw, stride, pad);
        // The transpose output plays the conv-input role in the geometry.
        let g = Geom { c: cout, h: oh, w: ow, kh, kw, stride, pad, oh: h, ow: wd };
        let ckk = cout * kh * kw;
        let hw = h * wd;

        let mut cols = vec![0.0f32; g.cols_len()];
        let mut data = vec![0.0f32; n * cout * oh * ow];
        {
            let xv = self.value(x).data();
            let wv = self.value(w).data();
            for i in 0..n {
                // cols = W^T x_n with W viewed as (Cin, Cout*KH*KW)
                sgemm(
                    ckk,
                    cin,
                    hw,
                    1.0,
                    wv,
                    true,
                    &xv[i * cin * hw..(i + 1) * cin * hw],
                    false,
                    0.0,
                    &mut cols,
                );
                col2im_add(&cols, g, &mut data[i * cout * oh * ow..(i + 1) * cout * oh * ow]);
            }
        }
        let out = tensor_like(&[n, cout, oh, ow], data);
        let (ix, iw) = (x.0, w.0);
        self.push_op("conv_transpose2d", out, &[x, w], move |vals, go, grads| {
            let xv = vals[ix].data();
            let wv = vals[iw].data();
            let mut gcols = vec![0.0f32; g.cols_len()];
            for i in 0..n {
                im2col(&go[i * cout * oh * ow..(i + 1) * cout * oh * ow], g, &mut gcols);
                with_grad(grads, ix, |dx| {
                    // dX_n += W gcols
                    sgemm(
                        cin,
                        ckk,
                        hw,
                        1.0,
                        wv,
                        false,
                        &gcols,
                        false,
                        1.0,
                        &mut dx[i * cin * hw..(i + 1) * cin * hw],
                    );
                });
                with_grad(grads, iw, |dw| {
                    // dW += x_n gcols^T
                    sgemm(
                        cin,
                        hw,
                        ckk,
                        1.0,
                        &xv[i * cin * hw..(i + 1) * cin * hw],
                        false,
                        &gcols,
                        true,
                        1.0,
                        dw,
                    );
                });
            }
        })
    }

    /// Nearest-neighbor upsampling by an integer factor.
    pub fn upsample_nearest(&mut self, x: TensorRef, factor: usize) -> Result<TensorRef> {
        let s = self.shape(x).to_vec();
        if s.len() != 4 {
            return Err(Error::invalid(
                "upsample_nearest",
                format!("expected 4-d input, got {s:?}"),
            ));
        }
        if factor == 0 {
            return Err(Error::invalid("upsample_nearest", "factor must be positive"));
        }
        let (n, c, h, w) = (s[0], s[1], s[2], s[3]);
        let (oh, ow) = (h * factor, w * factor);
        let src = self.value(x).data();
        let mut data = vec![0.0f32; n * c * oh * ow];
        for nc in 0..n * c {
            let sbase = nc * h * w;
            let dbase = nc * oh * ow;
            for oi in 0..oh {
                let srow = sbase + (oi / factor) * w;
                let drow = dbase + oi * ow;
                for oj in 0..ow {
                    data[drow + oj] = src[srow + oj / factor];
                }
            }
        }
        let out = tensor_like(&[n, c, oh, ow], data);
        let ix = x.0;
        self.push_op("upsample_nearest", out, &[x], move |_vals, go, grads| {
            with_grad(grads, ix, |dx| {
                for nc in 0..n * c {
                    let sbase = nc * h * w;
                    let dbase = nc * oh * ow;
                    for oi in 0..oh {
                        let srow = sbase + (oi / factor) * w;
                        let drow = dbase + oi * ow;
                        for oj in 0..ow {
                            dx[srow + oj / factor] += go[drow + oj];
                        }
                    }
                }
            });
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    #[test]
    fn identity_kernel_preserves_image() {
        let mut t = Tape::new();
        let img: Vec<f32> = (0..16).map(|v| v as f32).collect();
        let x = t.leaf(Tensor::from_vec(vec![1, 1, 4, 4], img.clone()).unwrap(), false);
        let k = t.leaf(Tensor::from_vec(vec![1, 1, 1, 1], vec![1.0]).unwrap(), false);
        let y = t.conv2d(x, k, 1, 0).unwrap();
        assert_eq!(t.shape(y), &[1, 1, 4, 4]);
        assert_eq!(t.value(y).data(), img.as_slice());
    }

    #[test]
    fn known_3x3_convolution() {
        // 3x3 all-ones kernel over a 3x3 image of ones, pad 1:
        // corners see 4, edges 6, center 9.
        let mut t = Tape::new();
        let x = t.leaf(Tensor::from_vec(vec![1, 1, 3, 3], vec![1.0; 9]).unwrap(), false);
        let k = t.leaf(Tensor::from_vec(vec![1, 1, 3, 3], vec![1.0; 9]).unwrap(), false);
        let y = t.conv2d(x, k, 1, 1).unwrap();
        assert_eq!(
            t.value(y).data(),
            &[4.0, 6.0, 4.0, 6.0, 9.0, 6.0, 4.0, 6.0, 4.0]
        );
    }

    #[test]
    fn strided_output_size() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::zeros(vec![2, 3, 8, 8]), false);
        let k = t.leaf(Tensor::zeros(vec![5, 3, 3, 3]), false);
        let y = t.conv2d(x, k, 2, 1).unwrap();
        assert_eq!(t.shape(y), &[2, 5, 4, 4]);
    }

    #[test]
    fn kernel_larger_than_padded_input_rejected() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::zeros(vec![1, 1, 2, 2]), false);
        let k = t.leaf(Tensor::zeros(vec![1, 1, 5, 5]), false);
        assert!(t.conv2d(x, k, 1, 1).is_err());
    }

    #[test]
    fn transpose_inverts_spatial_reduction() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::zeros(vec![1, 4, 8, 8]), false);
        let k = t.leaf(Tensor::zeros(vec![4, 2, 4, 4]), false);
        let y = t.conv_transpose2d(x, k, 2, 1).unwrap();
        assert_eq!(t.shape(y), &[1, 2, 16, 16]);
    }

    #[test]
    fn transpose_is_adjoint_of_conv() {
        // <conv(x), y> == <x, conv_transpose(y)> for matching geometry.
        use crate::rng::SeedStream;
        let mut rng = SeedStream::new(11);
        let mut t = Tape::new();
        let x_data = rng.normal_vec(2 * 3 * 7 * 7, 0.0, 1.0);
        let w_data = rng.normal_vec(4 * 3 * 3 * 3, 0.0, 1.0);
        let y_data = rng.normal_vec(2 * 4 * 4 * 4, 0.0, 1.0);
        let x = t.leaf(Tensor::from_vec(vec![2, 3, 7, 7], x_data.clone()).unwrap(), false);
        let w = t.leaf(Tensor::from_vec(vec![4, 3, 3, 3], w_data.clone()).unwrap(), false);
        let y = t.leaf(Tensor::from_vec(vec![2, 4, 4, 4], y_data.clone()).unwrap(), false);
        let cx = t.conv2d(x, w, 2, 1).unwrap();
        assert_eq!(t.shape(cx), &[2, 4, 4, 4]);

        // Same weight bits, with the transpose reading (Cin, Cout) roles
        // from the opposite sides.
        let wt = t.leaf(Tensor::from_vec(vec![4, 3, 3, 3], w_data).unwrap(), false);
        let ty = t.conv_transpose2d(y, wt, 2, 1).unwrap();
        assert_eq!(t.shape(ty), &[2, 3, 7, 7]);

        let lhs: f64 = t
            .value(cx)
            .data()
            .iter()
            .zip(&y_data)
            .map(|(&a, &b)| a as f64 * b as f64)
            .sum();
        let rhs: f64 = t
            .value(ty)
            .data()
            .iter()
            .zip(&x_data)
            .map(|(&a, &b)| a as f64 * b as f64)
            .sum();
        assert!(
            (lhs - rhs).abs() <= 1e-3 * lhs.abs().max(rhs.abs()).max(1.0),
            "adjoint identity violated: {lhs} vs {rhs}"
        );
    }

    #[test]
    fn upsample_then_pool_gradient() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::from_vec(vec![1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap(), true);
        let y = t.upsample_nearest(x, 2).unwrap();
        assert_eq!(t.shape(y), &[1, 1, 4, 4]);
        assert_eq!(
            t.value(y).data(),
            &[1., 1., 2., 2., 1., 1., 2., 2., 3., 3., 4., 4., 3., 3., 4., 4.]
        );
        let loss = t.sum(y).unwrap();
        t.backward(loss).unwrap();
        // Each source pixel fans out to a 2x2 block.
        assert_eq!(t.grad(x).unwrap(), &[4.0; 4]);
    }
}
