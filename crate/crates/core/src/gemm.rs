//! Thin safe wrapper over the `matrixmultiply` sgemm kernel.
//!
//! All matrices are row-major slices; transposition is expressed through
//! strides so no copies are made.

/// C = alpha * op(A) op(B) + beta * C, with op(X) = X or X^T.
///
/// `a` holds an `m x k` operand (stored `k x m` when `ta`), `b` a `k x n`
/// operand (stored `n x k` when `tb`), and `c` is `m x n` row-major.
#[allow(clippy::too_many_arguments)]
pub fn sgemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f32,
    a: &[f32],
    ta: bool,
    b: &[f32],
    tb: bool,
    beta: f32,
    c: &mut [f32],
) {
    assert_eq!(a.len(), m * k, "gemm: A length");
    assert_eq!(b.len(), k * n, "gemm: B length");
    assert_eq!(c.len(), m * n, "gemm: C length");
    let (rsa, csa) = if ta { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if tb { (1, k as isize) } else { (n as isize, 1) };
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
