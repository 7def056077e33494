//! Binary checkpoint format.
//!
//! ```text
//! "PRLB" | u32 version | u64 header_len | header (UTF-8) | f32 blob
//! ```
//! All integers and floats are little-endian. The header is `key=value`
//! lines: `seed`, `step`, `input` (`CxHxW`), `blob_bytes`, then one
//! `layer=<spec>` line per layer in chain order. The blob holds each
//! parameterized layer's weights followed by its bias, in layer order.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{infer_shapes, DenseParams, LayerParams, LayerSpec, Model};
use crate::error::{Error, Result};
use crate::tensor::{ConvParams, Tensor};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"PRLB";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_checkpoint(model: &Model<f32>) -> Vec<u8> {
    let params = model.flat_params();
    let [c, h, w] = model.input_shape();
    let mut header = format!(
        "seed={}\nstep={}\ninput={c}x{h}x{w}\nblob_bytes={}\n",
        model.seed(),
        model.step(),
        params.len() * 4
    );
    for layer in model.layers() {
        header.push_str(&format!("layer={layer}\n"));
    }
    let mut out = Vec::with_capacity(16 + header.len() + params.len() * 4);
    out.extend_from_slice(&CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    for v in params {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Header {
    seed: u64,
    step: u64,
    input: [usize; 3],
    blob_bytes: usize,
    layers: Vec<LayerSpec>,
}

fn parse_header(text: &str) -> Result<Header> {
    let (mut seed, mut step, mut input, mut blob_bytes) = (None, None, None, None);
    let mut layers = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Header(format!("line without '=': {line:?}")))?;
        let int = |v: &str| -> Result<u64> { v.parse().map_err(|_| Error::Header(format!("bad integer for {key}: {v:?}"))) };
        match key {
            "seed" => seed = Some(int(value)?),
            "step" => step = Some(int(value)?),
            "blob_bytes" => blob_bytes = Some(int(value)? as usize),
            "input" => {
                let dims: Vec<usize> = value
                    .split('x')
                    .map(|d| d.parse().map_err(|_| Error::Header(format!("bad input shape {value:?}"))))
                    .collect::<Result<_>>()?;
                let dims: [usize; 3] = dims
                    .try_into()
                    .map_err(|_| Error::Header(format!("input shape needs 3 dims: {value:?}")))?;
                input = Some(dims);
            }
            "layer" => layers.push(value.parse()?),
            other => return Err(Error::Header(format!("unknown key {other:?}"))),
        }
    }
    let missing = |k: &str| Error::Header(format!("missing {k}"));
    Ok(Header {
        seed: seed.ok_or_else(|| missing("seed"))?,
        step: step.ok_or_else(|| missing("step"))?,
        input: input.ok_or_else(|| missing("input"))?,
        blob_bytes: blob_bytes.ok_or_else(|| missing("blob_bytes"))?,
        layers,
    })
}

fn take<'a>(bytes: &'a [u8], at: usize, len: usize, context: &str) -> Result<&'a [u8]> {
    bytes.get(at..at + len).ok_or_else(|| Error::Truncated {
        context: context.to_string(),
    })
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<Model<f32>> {
    let magic: [u8; 4] = take(bytes, 0, 4, "magic")?.try_into().unwrap();
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::BadMagic { found: magic });
    }
    let version = u32::from_le_bytes(take(bytes, 4, 4, "version")?.try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let header_len = u64::from_le_bytes(take(bytes, 8, 8, "header length")?.try_into().unwrap()) as usize;
    let header_bytes = take(bytes, 16, header_len, "header")?;
    let header = std::str::from_utf8(header_bytes).map_err(|_| Error::Header("header is not UTF-8".into()))?;
    let header = parse_header(header)?;

    let blob = &bytes[16 + header_len..];
    if blob.len() < header.blob_bytes {
        return Err(Error::Truncated {
            context: format!("blob has {} of {} bytes", blob.len(), header.blob_bytes),
        });
    }
    if blob.len() > header.blob_bytes {
        return Err(Error::SizeDisagreement {
            expected: header.blob_bytes,
            actual: blob.len(),
        });
    }

    let shapes = infer_shapes(header.input, &header.layers)?;
    let mut implied = 0;
    for (layer, in_shape) in header.layers.iter().zip(&shapes) {
        implied += 4 * match *layer {
            LayerSpec::Conv {
                out_channels,
                kernel: (kh, kw),
                ..
            } => out_channels * in_shape[0] * kh * kw + out_channels,
            LayerSpec::Dense { out_features } => in_shape[0] * out_features + out_features,
            _ => 0,
        };
    }
    if implied != header.blob_bytes {
        return Err(Error::SizeDisagreement {
            expected: implied,
            actual: header.blob_bytes,
        });
    }

    let mut floats = blob
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()));
    let mut next = |shape: &[usize]| -> Result<Tensor<f32>> {
        let len = shape.iter().product();
        Tensor::new(shape.to_vec(), floats.by_ref().take(len).collect())
    };
    let mut params = Vec::with_capacity(header.layers.len());
    for (layer, in_shape) in header.layers.iter().zip(&shapes) {
        params.push(match *layer {
            LayerSpec::Conv {
                out_channels,
                kernel: (kh, kw),
                stride,
                padding,
            } => {
                let w = next(&[out_channels, in_shape[0], kh, kw])?;
                let b = next(&[out_channels])?;
                LayerParams::Conv(ConvParams::new(w, b, stride, padding)?)
            }
            LayerSpec::Dense { out_features } => LayerParams::Dense(DenseParams {
                weights: next(&[in_shape[0], out_features])?,
                bias: next(&[out_features])?,
            }),
            _ => LayerParams::None,
        });
    }
    Model::from_parts(header.input, header.layers, params, header.seed, header.step)
}

pub fn save_checkpoint(model: &Model<f32>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_checkpoint(model)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Model<f32>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(&bytes)
}

/// Hex SHA-256 of the serialized checkpoint.
pub fn checkpoint_digest(model: &Model<f32>) -> String {
    Sha256::digest(write_checkpoint(model))
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
