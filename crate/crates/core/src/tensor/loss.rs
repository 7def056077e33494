use super::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Mean softmax cross-entropy over the batch and its gradient
/// `(softmax − onehot) / N` with respect to the logits.
pub fn softmax_xent<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> Result<(T, Tensor<T>)> {
    logits.expect_rank("softmax_xent", 2)?;
    let (n, k) = (logits.shape()[0], logits.shape()[1]);
    if labels.len() != n {
        return Err(Error::ShapeMismatch {
            op: "softmax_xent (labels)",
            expected: vec![n],
            actual: vec![labels.len()],
        });
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::LabelOutOfRange { label, classes: k });
    }
    let scale = T::one() / T::from_usize(n.max(1)).unwrap();
    let mut loss = T::zero();
    let mut grad = Vec::with_capacity(n * k);
    for (row, &label) in logits.data().chunks_exact(k).zip(labels) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let exps: Vec<T> = row.iter().map(|&z| (z - max).exp()).collect();
        let total: T = exps.iter().copied().sum();
        loss = loss + (total.ln() - (row[label] - max));
        for (j, e) in exps.into_iter().enumerate() {
            let p = e / total;
            let target = if j == label { T::one() } else { T::zero() };
            grad.push((p - target) * scale);
        }
    }
    Ok((loss * scale, Tensor::new(vec![n, k], grad)?))
}
