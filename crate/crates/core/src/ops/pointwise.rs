//! Element-wise ops.

use crate::error::Result;
use crate::tape::{accumulate, Tape, TensorRef};

use super::tensor_like;

impl Tape {
    fn zip2(
        &mut self,
        op: &'static str,
        a: TensorRef,
        b: TensorRef,
        f: impl Fn(f32, f32) -> f32,
        backward: impl Fn(&[f32], &[f32], &[f32]) -> (Vec<f32>, Vec<f32>) + 'static,
    ) -> Result<TensorRef> {
        self.same_shape(op, a, b)?;
        let data: Vec<f32> = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let out = tensor_like(self.shape(a), data);
        let (ia, ib) = (a.0, b.0);
        self.push_op(op, out, &[a, b], move |vals, go, grads| {
            let (da, db) = backward(vals[ia].data(), vals[ib].data(), go);
            accumulate(grads, ia, da.into_iter());
            accumulate(grads, ib, db.into_iter());
        })
    }

    fn map1(
        &mut self,
        op: &'static str,
        a: TensorRef,
        f: impl Fn(f32) -> f32,
        // d(out)/d(in) as a function of (input, output) per element
        dfdx: impl Fn(f32, f32) -> f32 + 'static,
    ) -> Result<TensorRef> {
        let data: Vec<f32> = self.value(a).data().iter().map(|&x| f(x)).collect();
        let out = tensor_like(self.shape(a), data);
        let ia = a.0;
        let iout = self.num_nodes();
        self.push_op(op, out, &[a], move |vals, go, grads| {
            let x = vals[ia].data();
            let y = vals[iout].data();
            accumulate(
                grads,
                ia,
                go.iter()
                    .zip(x.iter().zip(y))
                    .map(|(&g, (&xv, &yv))| g * dfdx(xv, yv)),
            );
        })
    }

    pub fn add(&mut self, a: TensorRef, b: TensorRef) -> Result<TensorRef> {
        self.zip2(
            "add",
            a,
            b,
            |x, y| x + y,
            |_, _, go| (go.to_vec(), go.to_vec()),
        )
    }

    pub fn sub(&mut self, a: TensorRef, b: TensorRef) -> Result<TensorRef> {
        self.zip2(
            "sub",
            a,
            b,
            |x, y| x - y,
            |_, _, go| (go.to_vec(), go.iter().map(|g| -g).collect()),
        )
    }

    pub fn mul(&mut self, a: TensorRef, b: TensorRef) -> Result<TensorRef> {
        self.zip2(
            "mul",
            a,
            b,
            |x, y| x * y,
            |x, y, go| {
                let da = go.iter().zip(y).map(|(g, yv)| g * yv).collect();
                let db = go.iter().zip(x).map(|(g, xv)| g * xv).collect();
                (da, db)
            },
        )
    }

    pub fn add_scalar(&mut self, a: TensorRef, c: f32) -> Result<TensorRef> {
        self.map1("add_scalar", a, |x| x + c, |_, _| 1.0)
    }

    pub fn mul_scalar(&mut self, a: TensorRef, c: f32) -> Result<TensorRef> {
        self.map1("mul_scalar", a, move |x| x * c, move |_, _| c)
    }

    pub fn neg(&mut self, a: TensorRef) -> Result<TensorRef> {
        self.mul_scalar(a, -1.0)
    }

    pub fn leaky_relu(&mut self, a: TensorRef, slope: f32) -> Result<TensorRef> {
        self.map1(
            "leaky_relu",
            a,
            move |x| if x > 0.0 { x } else { slope * x },
            move |x, _| if x > 0.0 { 1.0 } else { slope },
        )
    }

    pub fn tanh(&mut self, a: TensorRef) -> Result<TensorRef> {
        self.map1("tanh", a, |x| x.tanh(), |_, y| 1.0 - y * y)
    }

    /// softplus(x) = ln(1 + e^x), computed in its overflow-safe form.
    pub fn softplus(&mut self, a: TensorRef) -> Result<TensorRef> {
        self.map1(
            "softplus",
            a,
            |x| x.max(0.0) + (-x.abs()).exp().ln_1p(),
            |x, _| 1.0 / (1.0 + (-x).exp()),
        )
    }

    pub fn exp(&mut self, a: TensorRef) -> Result<TensorRef> {
        self.map1("exp", a, |x| x.exp(), |_, y| y)
    }

    /// Natural log; non-positive inputs surface as a non-finite error.
    pub fn log(&mut self, a: TensorRef) -> Result<TensorRef> {
        self.map1("log", a, |x| x.ln(), |x, _| 1.0 / x)
    }

    pub fn sqrt(&mut self, a: TensorRef) -> Result<TensorRef> {
        self.map1("sqrt", a, |x| x.sqrt(), |_, y| 0.5 / y)
    }

    pub fn recip(&mut self, a: TensorRef) -> Result<TensorRef> {
        self.map1("recip", a, |x| 1.0 / x, |_, y| -y * y)
    }

    /// |x|, with subgradient 0 at the kink.
    pub fn abs(&mut self, a: TensorRef) -> Result<TensorRef> {
        self.map1(
            "abs",
            a,
            |x| x.abs(),
            |x, _| {
                if x > 0.0 {
                    1.0
                } else if x < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            },
        )
    }

    /// Clamp to [lo, hi]; gradient passes through inside the interval.
    pub fn clamp(&mut self, a: TensorRef, lo: f32, hi: f32) -> Result<TensorRef> {
        assert!(lo < hi, "clamp: lo must be below hi");
        self.map1(
            "clamp",
            a,
            move |x| x.clamp(lo, hi),
            move |x, _| if (lo..=hi).contains(&x) { 1.0 } else { 0.0 },
        )
    }
}
