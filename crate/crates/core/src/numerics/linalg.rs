use crate::error::{Error, Result};

use super::tensor::{Real, Tensor};

/// Layout flag for one operand of [`gemm_into`].
#[derive(Clone, Copy)]
enum Op {
    N,
    T,
}

/// `c = a' * b' + beta * c` where `'` applies the requested transpose.
fn gemm_into<T: Real>(a: &Tensor<T>, ta: Op, b: &Tensor<T>, tb: Op, beta: T, c: &mut Tensor<T>) {
    let (ar, ac) = (a.rows(), a.cols());
    let (br, bc) = (b.rows(), b.cols());
    let (m, k, rsa, csa) = match ta {
        Op::N => (ar, ac, ac as isize, 1),
        Op::T => (ac, ar, 1, ac as isize),
    };
    let (k2, n, rsb, csb) = match tb {
        Op::N => (br, bc, bc as isize, 1),
        Op::T => (bc, br, 1, bc as isize),
    };
    assert_eq!(k, k2, "gemm inner dimensions");
    assert_eq!(c.shape(), &[m, n], "gemm output shape");
    // SAFETY: strides and sizes are derived from the tensors' own shapes,
    // which equal their data lengths.
    unsafe {
        T::gemm(
            m,
            k,
            n,
            T::one(),
            a.data().as_ptr(),
            rsa,
            csa,
            b.data().as_ptr(),
            rsb,
            csb,
            beta,
            c.data_mut().as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Plain matrix product `a · b`.
pub fn matmul<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (m, k) = a.dims2()?;
    let (k2, n) = b.dims2()?;
    if k != k2 {
        return Err(Error::dim("matmul", a.shape(), b.shape()));
    }
    let mut out = Tensor::zeros(&[m, n]);
    gemm_into(a, Op::N, b, Op::N, T::zero(), &mut out);
    Ok(out)
}

/// `x · W + b` for a batch `x` of shape `[B, n]`, `W` of shape `[n, m]` and `b` of length `m`.
pub fn affine_forward<T: Real>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (rows, n) = x.dims2()?;
    let (n2, m) = w.dims2()?;
    if n != n2 {
        return Err(Error::dim("affine_forward", x.shape(), w.shape()));
    }
    if b.len() != m {
        return Err(Error::dim("affine_forward bias", w.shape(), b.shape()));
    }
    let mut out = Tensor::zeros(&[rows, m]);
    for i in 0..rows {
        out.row_mut(i).copy_from_slice(b.data());
    }
    gemm_into(x, Op::N, w, Op::N, T::one(), &mut out);
    Ok(out)
}

fn check_backward_shapes<T: Real>(grad_out: &Tensor<T>, x: &Tensor<T>, w: &Tensor<T>) -> Result<()> {
    let (rows, n) = x.dims2()?;
    let (n2, m) = w.dims2()?;
    let (g_rows, g_cols) = grad_out.dims2()?;
    if n != n2 {
        return Err(Error::dim("affine_backward", x.shape(), w.shape()));
    }
    if g_rows != rows || g_cols != m {
        return Err(Error::dim("affine_backward grad", grad_out.shape(), &[rows, m]));
    }
    Ok(())
}

/// Gradients of [`affine_forward`]: `(grad_x, grad_W, grad_b)`.
pub fn affine_backward<T: Real>(
    grad_out: &Tensor<T>,
    x: &Tensor<T>,
    w: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let mut grad_w = Tensor::zeros(w.shape());
    let mut grad_b = Tensor::zeros(&[w.cols()]);
    let grad_x = affine_backward_into(grad_out, x, w, &mut grad_w, &mut grad_b, true)?
        .expect("grad_x requested");
    Ok((grad_x, grad_w, grad_b))
}

/// Accumulates weight and bias gradients into existing buffers and
/// optionally returns the input gradient.
pub fn affine_backward_into<T: Real>(
    grad_out: &Tensor<T>,
    x: &Tensor<T>,
    w: &Tensor<T>,
    grad_w: &mut Tensor<T>,
    grad_b: &mut Tensor<T>,
    want_grad_x: bool,
) -> Result<Option<Tensor<T>>> {
    check_backward_shapes(grad_out, x, w)?;
    if grad_w.shape() != w.shape() {
        return Err(Error::dim("affine_backward grad_w", grad_w.shape(), w.shape()));
    }
    if grad_b.len() != w.cols() {
        return Err(Error::dim("affine_backward grad_b", grad_b.shape(), &[w.cols()]));
    }
    gemm_into(x, Op::T, grad_out, Op::N, T::one(), grad_w);
    let gb = grad_b.data_mut();
    for i in 0..grad_out.rows() {
        for (acc, &g) in gb.iter_mut().zip(grad_out.row(i)) {
            *acc = *acc + g;
        }
    }
    if !want_grad_x {
        return Ok(None);
    }
    let mut grad_x = Tensor::zeros(x.shape());
    gemm_into(grad_out, Op::N, w, Op::T, T::zero(), &mut grad_x);
    Ok(Some(grad_x))
}

pub fn relu<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Passes `grad_out` where the cached input is strictly positive; zero at 0.
pub fn relu_backward<T: Real>(grad_out: &Tensor<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
    if grad_out.shape() != x.shape() {
        return Err(Error::dim("relu_backward", grad_out.shape(), x.shape()));
    }
    let data = grad_out
        .data()
        .iter()
        .zip(x.data())
        .map(|(&g, &v)| if v > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::new(x.shape(), data)
}
