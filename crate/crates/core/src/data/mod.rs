//! Dataset loaders (CIFAR-10 binary, MNIST IDX), a synthetic corpus in the
//! CIFAR-10 binary layout, and seeded batch iteration.

mod cifar;
mod mnist;
pub mod synthetic;

pub use cifar::{
    encode_cifar10_record, load_cifar10_bin, parse_cifar10_bin, CIFAR10_MEAN, CIFAR10_RECORD_BYTES, CIFAR10_STD,
};
pub use mnist::{load_mnist_idx, parse_mnist_idx, MNIST_MEAN, MNIST_STD};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    /// `[N, C, H, W]`, normalized.
    pub images: Tensor<T>,
    pub labels: Vec<usize>,
    pub class_count: usize,
    pub source: String,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(images: Tensor<T>, labels: Vec<usize>, class_count: usize, source: impl Into<String>) -> Result<Self> {
        images.expect_rank("dataset images", 4)?;
        if images.shape()[0] != labels.len() {
            return Err(Error::ShapeMismatch {
                op: "dataset labels",
                expected: vec![images.shape()[0]],
                actual: vec![labels.len()],
            });
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= class_count) {
            return Err(Error::LabelOutOfRange {
                label,
                classes: class_count,
            });
        }
        Ok(Dataset {
            images,
            labels,
            class_count,
            source: source.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Per-sample image shape `[C, H, W]`.
    pub fn image_shape(&self) -> [usize; 3] {
        let s = self.images.shape();
        [s[1], s[2], s[3]]
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Dataset {
            images: self.images.select_items(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_count: self.class_count,
            source: self.source.clone(),
        }
    }

    /// The first `n` samples (all of them if `n >= len`).
    pub fn take(&self, n: usize) -> Self {
        let n = n.min(self.len());
        let idx: Vec<usize> = (0..n).collect();
        let mut out = self.select(&idx);
        out.source = format!("{} [first {n}]", self.source);
        out
    }

    /// Samples `start..end` of the file order.
    pub fn range(&self, start: usize, end: usize) -> Self {
        let end = end.min(self.len());
        let idx: Vec<usize> = (start.min(end)..end).collect();
        let mut out = self.select(&idx);
        out.source = format!("{} [{start}..{end}]", self.source);
        out
    }

    pub fn batches(&self, batch_size: usize, seed: u64, shuffle: bool) -> Result<Batches<'_, T>> {
        batches(self, batch_size, seed, shuffle)
    }
}

/// Deterministic batch sequence over one epoch; the last batch may be short.
pub struct Batches<'a, T> {
    dataset: &'a Dataset<T>,
    order: Vec<usize>,
    batch_size: usize,
    cursor: usize,
}

impl<'a, T> Batches<'a, T> {
    /// Sample order for this epoch.
    pub fn order(&self) -> &[usize] {
        &self.order
    }
}

impl<T: Scalar> Iterator for Batches<'_, T> {
    type Item = (Tensor<T>, Vec<usize>);

    fn next(&mut self) -> Option<Self::Item> {
        if self.cursor >= self.order.len() {
            return None;
        }
        let end = (self.cursor + self.batch_size).min(self.order.len());
        let idx = &self.order[self.cursor..end];
        self.cursor = end;
        let images = self.dataset.images.select_items(idx);
        let labels = idx.iter().map(|&i| self.dataset.labels[i]).collect();
        Some((images, labels))
    }
}

/// With `shuffle`, the epoch order is a Fisher–Yates permutation drawn from a
/// ChaCha8 stream seeded with `seed`; otherwise file order.
pub fn batches<T: Scalar>(dataset: &Dataset<T>, batch_size: usize, seed: u64, shuffle: bool) -> Result<Batches<'_, T>> {
    if batch_size == 0 {
        return Err(Error::InvalidArgument("batch_size must be >= 1".into()));
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    if shuffle {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    Ok(Batches {
        dataset,
        order,
        batch_size,
        cursor: 0,
    })
}

pub(crate) fn normalize<T: Scalar>(byte: u8, mean: f64, std: f64) -> T {
    T::from_f64_lossy((byte as f64 / 255.0 - mean) / std)
}
