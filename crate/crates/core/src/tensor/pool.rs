use super::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// 2×2 max pooling with stride 2.
///
/// Returns the pooled tensor and, per output element, the flat index into the
/// input of the winning element. Ties go to the lowest flat index.
pub fn maxpool2<T: Scalar>(input: &Tensor<T>) -> Result<(Tensor<T>, Vec<usize>)> {
    input.expect_rank("maxpool2", 4)?;
    let &[n, c, h, w] = input.shape() else {
        unreachable!()
    };
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::OddSpatial {
            height: h,
            width: w,
        });
    }
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(n * c * oh * ow);
    let mut indices = Vec::with_capacity(n * c * oh * ow);
    let x = input.data();
    for plane in 0..n * c {
        let base = plane * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let top = base + 2 * oy * w + 2 * ox;
                // window in ascending flat-index order
                let mut best = top;
                for cand in [top + 1, top + w, top + w + 1] {
                    if x[cand] > x[best] {
                        best = cand;
                    }
                }
                out.push(x[best]);
                indices.push(best);
            }
        }
    }
    Ok((Tensor::new(vec![n, c, oh, ow], out)?, indices))
}

/// Routes each output gradient to its recorded argmax position.
pub fn maxpool2_backward<T: Scalar>(
    input_shape: &[usize],
    indices: &[usize],
    grad_out: &Tensor<T>,
) -> Result<Tensor<T>> {
    let &[n, c, h, w] = input_shape else {
        return Err(Error::InvalidShape {
            op: "maxpool2_backward",
            detail: format!("expected rank-4 input shape, got {input_shape:?}"),
        });
    };
    grad_out.expect_shape("maxpool2_backward", &[n, c, h / 2, w / 2])?;
    if indices.len() != grad_out.len() {
        return Err(Error::InvalidShape {
            op: "maxpool2_backward",
            detail: format!(
                "{} argmax indices for {} output gradients",
                indices.len(),
                grad_out.len()
            ),
        });
    }
    let mut grad_in = Tensor::zeros(input_shape);
    let gi = grad_in.data_mut();
    for (&idx, &g) in indices.iter().zip(grad_out.data()) {
        gi[idx] = gi[idx] + g;
    }
    Ok(grad_in)
}
