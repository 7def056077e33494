//! Procedural ten-class image corpus written in the CIFAR-10 binary layout.
//!
//! Each class is a geometric motif (disk, square, triangle, stripes, ...)
//! drawn at a random position, size and colour over a noisy gradient
//! background. Colour carries no class information, so a network has to pick
//! up shape and texture. Used wherever real CIFAR-10 files are not present.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::cifar::{encode_cifar10_record, CIFAR10_RECORD_BYTES};
use crate::error::{Error, Result};

const SIDE: usize = 32;

pub const CLASS_NAMES: [&str; 10] = [
    "disk", "square", "triangle", "hstripes", "vstripes", "plus", "ring", "dstripes", "checker", "cross",
];

fn motif(class: usize, dx: f64, dy: f64, r: f64, phase: f64) -> bool {
    let inside_box = dx.abs() < r && dy.abs() < r;
    let stripes = |v: f64| ((v + phase) / 3.0).floor().rem_euclid(2.0) == 0.0;
    match class {
        0 => dx.hypot(dy) < r,
        1 => dx.abs().max(dy.abs()) < 0.8 * r,
        2 => dy > -0.8 * r && dy < 0.8 * r && dx.abs() < 0.6 * (dy + 0.8 * r),
        3 => inside_box && stripes(dy),
        4 => inside_box && stripes(dx),
        5 => (dx.abs() < 0.3 * r && dy.abs() < r) || (dy.abs() < 0.3 * r && dx.abs() < r),
        6 => {
            let d = dx.hypot(dy);
            d > 0.55 * r && d < r
        }
        7 => inside_box && stripes((dx + dy) * std::f64::consts::FRAC_1_SQRT_2),
        8 => inside_box && (((dx + phase) / 4.0).floor() + ((dy + phase) / 4.0).floor()).rem_euclid(2.0) == 0.0,
        9 => ((dx - dy).abs() < 0.3 * r || (dx + dy).abs() < 0.3 * r) && dx.abs().max(dy.abs()) < r,
        _ => unreachable!(),
    }
}

fn luminance(c: [f64; 3]) -> f64 {
    0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]
}

fn render(class: usize, rng: &mut ChaCha8Rng) -> [u8; 3 * SIDE * SIDE] {
    let bg: [f64; 3] = std::array::from_fn(|_| rng.gen_range(0.15..0.85));
    let mut fg: [f64; 3] = std::array::from_fn(|_| rng.gen_range(0.0..1.0));
    if (luminance(fg) - luminance(bg)).abs() < 0.25 {
        fg = fg.map(|v| 1.0 - v);
        if (luminance(fg) - luminance(bg)).abs() < 0.25 {
            let up = luminance(bg) < 0.5;
            fg = fg.map(|v| if up { (v + 0.5).min(1.0) } else { (v - 0.5).max(0.0) });
        }
    }
    let angle = rng.gen_range(0.0..std::f64::consts::TAU);
    let (gx, gy) = (angle.cos() * 0.2, angle.sin() * 0.2);
    let cx = 15.5 + rng.gen_range(-5.0..5.0);
    let cy = 15.5 + rng.gen_range(-5.0..5.0);
    let r = rng.gen_range(6.0..10.5);
    let phase = rng.gen_range(0.0..6.0);

    let mut px = [0u8; 3 * SIDE * SIDE];
    for y in 0..SIDE {
        for x in 0..SIDE {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            let on = motif(class, dx, dy, r, phase);
            let shade = gx * (x as f64 / 31.0 - 0.5) + gy * (y as f64 / 31.0 - 0.5);
            for c in 0..3 {
                let base = if on { fg[c] } else { bg[c] + shade };
                let v = base + rng.gen_range(-0.12..0.12);
                px[c * SIDE * SIDE + y * SIDE + x] = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
            }
        }
    }
    px
}

/// `count` records; labels cycle through the ten classes.
pub fn shapes_cifar_bytes(count: usize, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count * CIFAR10_RECORD_BYTES);
    for i in 0..count {
        let class = i % 10;
        out.extend_from_slice(&encode_cifar10_record(class as u8, &render(class, &mut rng)));
    }
    out
}

pub fn write_shapes_cifar(path: impl AsRef<Path>, count: usize, seed: u64) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, shapes_cifar_bytes(count, seed)).map_err(|e| Error::io(path, e))
}
