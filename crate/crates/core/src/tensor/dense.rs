use super::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

fn dims<T: Scalar>(input: &Tensor<T>, weights: &Tensor<T>, bias: &Tensor<T>) -> Result<(usize, usize, usize)> {
    input.expect_rank("dense", 2)?;
    weights.expect_rank("dense (weights)", 2)?;
    let (n, d) = (input.shape()[0], input.shape()[1]);
    let (wd, m) = (weights.shape()[0], weights.shape()[1]);
    if wd != d {
        return Err(Error::ShapeMismatch {
            op: "dense (input features)",
            expected: vec![wd],
            actual: vec![d],
        });
    }
    bias.expect_shape("dense (bias)", &[m])?;
    Ok((n, d, m))
}

/// `input [N,D] · weights [D,M] + bias [M]`.
pub fn dense_forward<T: Scalar>(input: &Tensor<T>, weights: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, d, m) = dims(input, weights, bias)?;
    let mut out = Vec::with_capacity(n * m);
    for _ in 0..n {
        out.extend_from_slice(bias.data());
    }
    T::gemm(
        n,
        d,
        m,
        T::one(),
        input.data(),
        (d as isize, 1),
        weights.data(),
        (m as isize, 1),
        T::one(),
        &mut out,
        (m as isize, 1),
    );
    Tensor::new(vec![n, m], out)
}

/// Returns `(grad_input, grad_weights, grad_bias)`.
pub fn dense_backward<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    bias: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let (n, d, m) = dims(input, weights, bias)?;
    grad_out.expect_shape("dense_backward (grad_out)", &[n, m])?;
    let grad_in = dense_backward_input(weights, grad_out)?;
    let mut gw = vec![T::zero(); d * m];
    T::gemm(
        d,
        n,
        m,
        T::one(),
        input.data(),
        (1, d as isize),
        grad_out.data(),
        (m as isize, 1),
        T::zero(),
        &mut gw,
        (m as isize, 1),
    );
    let mut gb = vec![T::zero(); m];
    for row in grad_out.data().chunks_exact(m) {
        for (acc, &g) in gb.iter_mut().zip(row) {
            *acc = *acc + g;
        }
    }
    Ok((grad_in, Tensor::new(vec![d, m], gw)?, Tensor::new(vec![m], gb)?))
}

pub fn dense_backward_input<T: Scalar>(weights: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    weights.expect_rank("dense_backward (weights)", 2)?;
    grad_out.expect_rank("dense_backward (grad_out)", 2)?;
    let (d, m) = (weights.shape()[0], weights.shape()[1]);
    let n = grad_out.shape()[0];
    if grad_out.shape()[1] != m {
        return Err(Error::ShapeMismatch {
            op: "dense_backward (grad_out)",
            expected: vec![n, m],
            actual: grad_out.shape().to_vec(),
        });
    }
    let mut gi = vec![T::zero(); n * d];
    T::gemm(
        n,
        m,
        d,
        T::one(),
        grad_out.data(),
        (m as isize, 1),
        weights.data(),
        (1, m as isize),
        T::zero(),
        &mut gi,
        (d as isize, 1),
    );
    Tensor::new(vec![n, d], gi)
}
