use std::fs;
use std::path::Path;

use super::{normalize, Dataset};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const CIFAR10_RECORD_BYTES: usize = 3073;
pub const CIFAR10_MEAN: [f64; 3] = [0.4914, 0.4822, 0.4465];
pub const CIFAR10_STD: [f64; 3] = [0.2470, 0.2435, 0.2616];

const PLANE: usize = 32 * 32;

/// One record: label byte, then R, G, B planes of 32×32 row-major bytes.
pub fn encode_cifar10_record(label: u8, pixels: &[u8; 3 * PLANE]) -> [u8; CIFAR10_RECORD_BYTES] {
    let mut rec = [0u8; CIFAR10_RECORD_BYTES];
    rec[0] = label;
    rec[1..].copy_from_slice(pixels);
    rec
}

/// Decodes concatenated CIFAR-10 records; `source` names the origin in
/// errors and in the dataset provenance.
pub fn parse_cifar10_bin<T: Scalar>(bytes: &[u8], source: &Path) -> Result<Dataset<T>> {
    if bytes.len() % CIFAR10_RECORD_BYTES != 0 {
        return Err(Error::Data {
            path: source.to_path_buf(),
            reason: format!(
                "length {} is not a multiple of the {CIFAR10_RECORD_BYTES}-byte record size",
                bytes.len()
            ),
        });
    }
    let n = bytes.len() / CIFAR10_RECORD_BYTES;
    let mut labels = Vec::with_capacity(n);
    let mut data = Vec::with_capacity(n * 3 * PLANE);
    for (i, rec) in bytes.chunks_exact(CIFAR10_RECORD_BYTES).enumerate() {
        if rec[0] > 9 {
            return Err(Error::Data {
                path: source.to_path_buf(),
                reason: format!("record {i} has label byte {} (> 9)", rec[0]),
            });
        }
        labels.push(rec[0] as usize);
        for (c, plane) in rec[1..].chunks_exact(PLANE).enumerate() {
            data.extend(plane.iter().map(|&b| normalize::<T>(b, CIFAR10_MEAN[c], CIFAR10_STD[c])));
        }
    }
    Dataset::new(
        Tensor::new(vec![n, 3, 32, 32], data)?,
        labels,
        10,
        source.display().to_string(),
    )
}

/// Loads and concatenates the given CIFAR-10 binary batch files in order.
pub fn load_cifar10_bin<T: Scalar, P: AsRef<Path>>(paths: &[P]) -> Result<Dataset<T>> {
    let mut bytes = Vec::new();
    let mut names = Vec::new();
    for p in paths {
        let p = p.as_ref();
        let chunk = fs::read(p).map_err(|e| Error::io(p, e))?;
        if chunk.len() % CIFAR10_RECORD_BYTES != 0 {
            return parse_cifar10_bin(&chunk, p);
        }
        bytes.extend_from_slice(&chunk);
        names.push(p.display().to_string());
    }
    let joined = names.join("+");
    parse_cifar10_bin(&bytes, Path::new(&joined))
}
