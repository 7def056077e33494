use std::fs;
use std::path::Path;

use super::{normalize, Dataset};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const MNIST_MEAN: f64 = 0.1307;
pub const MNIST_STD: f64 = 0.3081;

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], at: usize, path: &Path) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or_else(|| Error::Data {
            path: path.to_path_buf(),
            reason: "truncated IDX header".into(),
        })
}

fn data_err(path: &Path, reason: String) -> Error {
    Error::Data {
        path: path.to_path_buf(),
        reason,
    }
}

/// Decodes an IDX image file (`0x803`, `[n, rows, cols]`) and an IDX label
/// file (`0x801`, `[n]`).
pub fn parse_mnist_idx<T: Scalar>(images: &[u8], labels: &[u8], image_path: &Path, label_path: &Path) -> Result<Dataset<T>> {
    let magic = be_u32(images, 0, image_path)?;
    if magic != IMAGE_MAGIC {
        return Err(data_err(image_path, format!("bad image magic {magic:#010x}, expected {IMAGE_MAGIC:#010x}")));
    }
    let magic = be_u32(labels, 0, label_path)?;
    if magic != LABEL_MAGIC {
        return Err(data_err(label_path, format!("bad label magic {magic:#010x}, expected {LABEL_MAGIC:#010x}")));
    }
    let n = be_u32(images, 4, image_path)? as usize;
    let rows = be_u32(images, 8, image_path)? as usize;
    let cols = be_u32(images, 12, image_path)? as usize;
    let label_count = be_u32(labels, 4, label_path)? as usize;
    if label_count != n {
        return Err(data_err(label_path, format!("{label_count} labels for {n} images")));
    }
    let pixels = &images[16..];
    if pixels.len() != n * rows * cols {
        return Err(data_err(
            image_path,
            format!("expected {} pixel bytes for {n}x{rows}x{cols}, found {}", n * rows * cols, pixels.len()),
        ));
    }
    let label_bytes = &labels[8..];
    if label_bytes.len() != n {
        return Err(data_err(label_path, format!("expected {n} label bytes, found {}", label_bytes.len())));
    }
    if let Some(&bad) = label_bytes.iter().find(|&&l| l > 9) {
        return Err(data_err(label_path, format!("label {bad} out of range")));
    }
    let data = pixels.iter().map(|&b| normalize::<T>(b, MNIST_MEAN, MNIST_STD)).collect();
    Dataset::new(
        Tensor::new(vec![n, 1, rows, cols], data)?,
        label_bytes.iter().map(|&l| l as usize).collect(),
        10,
        image_path.display().to_string(),
    )
}

pub fn load_mnist_idx<T: Scalar>(image_path: impl AsRef<Path>, label_path: impl AsRef<Path>) -> Result<Dataset<T>> {
    let (ip, lp) = (image_path.as_ref(), label_path.as_ref());
    let images = fs::read(ip).map_err(|e| Error::io(ip, e))?;
    let labels = fs::read(lp).map_err(|e| Error::io(lp, e))?;
    parse_mnist_idx(&images, &labels, ip, lp)
}
