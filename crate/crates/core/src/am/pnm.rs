//! Binary PPM (P6) / PGM (P5) export of patterns and pattern grids.

use std::fs;
use std::path::Path;

use super::Pattern;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Gap between grid cells, in pixels.
pub const GRID_SEPARATOR: usize = 2;

/// 8-bit image with 1 (gray) or 3 (RGB) interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PnmImage {
    pub channels: usize,
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl PnmImage {
    pub fn to_bytes(&self) -> Vec<u8> {
        let magic = if self.channels == 3 { "P6" } else { "P5" };
        let mut out = format!("{magic}\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let bad = |why: &str| Error::InvalidArgument(format!("not a binary PNM image: {why}"));
        let mut fields = Vec::with_capacity(4);
        let mut pos = 0;
        while fields.len() < 4 {
            while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
                if bytes[pos] == b'#' {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                } else {
                    pos += 1;
                }
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(bad("truncated header"));
            }
            fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("header not ASCII"))?);
        }
        pos += 1; // single whitespace byte before the raster
        let channels = match fields[0] {
            "P6" => 3,
            "P5" => 1,
            other => return Err(bad(&format!("magic {other:?}"))),
        };
        let num = |s: &str| s.parse::<usize>().map_err(|_| bad("bad number"));
        let (width, height, maxval) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
        if maxval != 255 {
            return Err(bad("max value must be 255"));
        }
        let pixels = bytes.get(pos..).unwrap_or_default().to_vec();
        if pixels.len() != width * height * channels {
            return Err(bad("raster size does not match dimensions"));
        }
        Ok(PnmImage {
            channels,
            width,
            height,
            pixels,
        })
    }
}

/// Min-max scales one `[C, H, W]` image to 0..=255; constant images become
/// mid-gray (128).
pub fn encode_pattern<T: Scalar>(image: &Tensor<T>) -> Result<PnmImage> {
    let &[c, h, w] = image.shape() else {
        return Err(Error::InvalidShape {
            op: "pnm export",
            detail: format!("expected [C,H,W], got {:?}", image.shape()),
        });
    };
    if c != 1 && c != 3 {
        return Err(Error::InvalidShape {
            op: "pnm export",
            detail: format!("only 1 or 3 channels can be exported, got {c}"),
        });
    }
    let vals: Vec<f64> = image.data().iter().map(|v| v.as_f64()).collect();
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scale = |v: f64| -> u8 {
        if hi > lo {
            ((v - lo) / (hi - lo) * 255.0).round().clamp(0.0, 255.0) as u8
        } else {
            128
        }
    };
    let plane = h * w;
    let mut pixels = Vec::with_capacity(c * plane);
    for i in 0..plane {
        for ch in 0..c {
            pixels.push(scale(vals[ch * plane + i]));
        }
    }
    Ok(PnmImage {
        channels: c,
        width: w,
        height: h,
        pixels,
    })
}

/// Canvas size `(width, height)` for `count` cells of `cell_w × cell_h`.
pub fn grid_dims(count: usize, columns: usize, cell_w: usize, cell_h: usize) -> (usize, usize) {
    let columns = columns.max(1).min(count.max(1));
    let rows = count.div_ceil(columns).max(1);
    (
        columns * cell_w + (columns - 1) * GRID_SEPARATOR,
        rows * cell_h + (rows - 1) * GRID_SEPARATOR,
    )
}

/// Row-major grid of individually scaled cells on a black background.
pub fn encode_grid<T: Scalar>(patterns: &[Pattern<T>], columns: usize) -> Result<PnmImage> {
    let first = patterns
        .first()
        .ok_or_else(|| Error::InvalidArgument("grid needs at least one pattern".into()))?;
    if columns == 0 {
        return Err(Error::InvalidArgument("grid needs at least one column".into()));
    }
    let cells = patterns
        .iter()
        .map(|p| {
            p.image.expect_shape("pnm grid", first.image.shape())?;
            encode_pattern(&p.image)
        })
        .collect::<Result<Vec<_>>>()?;
    let (cw, ch, chans) = (cells[0].width, cells[0].height, cells[0].channels);
    let cols = columns.min(cells.len());
    let (width, height) = grid_dims(cells.len(), cols, cw, ch);
    let mut pixels = vec![0u8; width * height * chans];
    for (i, cell) in cells.iter().enumerate() {
        let (r, c) = (i / cols, i % cols);
        let (x0, y0) = (c * (cw + GRID_SEPARATOR), r * (ch + GRID_SEPARATOR));
        for y in 0..ch {
            let dst = ((y0 + y) * width + x0) * chans;
            pixels[dst..dst + cw * chans].copy_from_slice(&cell.pixels[y * cw * chans..(y + 1) * cw * chans]);
        }
    }
    Ok(PnmImage {
        channels: chans,
        width,
        height,
        pixels,
    })
}

fn write(path: &Path, img: &PnmImage) -> Result<()> {
    fs::write(path, img.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn export_pattern_ppm<T: Scalar>(pattern: &Pattern<T>, path: impl AsRef<Path>) -> Result<()> {
    write(path.as_ref(), &encode_pattern(&pattern.image)?)
}

pub fn export_grid_ppm<T: Scalar>(patterns: &[Pattern<T>], columns: usize, path: impl AsRef<Path>) -> Result<()> {
    write(path.as_ref(), &encode_grid(patterns, columns)?)
}
