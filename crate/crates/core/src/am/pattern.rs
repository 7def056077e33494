use super::Pattern;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

const DEGENERATE_STD: f64 = 1e-8;

/// Flattened, zero-mean, unit-variance copy of `image`; a constant image maps
/// to the zero vector.
pub fn standardize<T: Scalar>(image: &Tensor<T>) -> Vec<T> {
    let n = image.len();
    if n == 0 {
        return Vec::new();
    }
    let mean = image.data().iter().map(|v| v.as_f64()).sum::<f64>() / n as f64;
    let var = image.data().iter().map(|v| (v.as_f64() - mean).powi(2)).sum::<f64>() / n as f64;
    let std = var.sqrt();
    if std < DEGENERATE_STD {
        return vec![T::zero(); n];
    }
    image
        .data()
        .iter()
        .map(|v| T::from_f64_lossy((v.as_f64() - mean) / std))
        .collect()
}

pub fn pattern_vector<T: Scalar>(pattern: &Pattern<T>) -> Vec<T> {
    standardize(&pattern.image)
}

/// Euclidean distance between the standardized images.
pub fn pattern_distance<T: Scalar>(p: &Pattern<T>, q: &Pattern<T>) -> Result<T> {
    if p.image.shape() != q.image.shape() {
        return Err(Error::ShapeMismatch {
            op: "pattern_distance",
            expected: p.image.shape().to_vec(),
            actual: q.image.shape().to_vec(),
        });
    }
    Ok(euclidean(&pattern_vector(p), &pattern_vector(q)))
}

pub(crate) fn euclidean<T: Scalar>(a: &[T], b: &[T]) -> T {
    T::from_f64_lossy(
        a.iter()
            .zip(b)
            .map(|(x, y)| (x.as_f64() - y.as_f64()).powi(2))
            .sum::<f64>()
            .sqrt(),
    )
}
