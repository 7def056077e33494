//! Independent oracles and generators shared by the integration tests and
//! the acceptance runner.
#![allow(dead_code)]

pub mod gradcheck;

use prunelab::model::{LayerSpec, Model};
use prunelab::prune::{FilterId, PrunePlan};
use prunelab::tensor::{ConvParams, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0))
}

/// Direct-loop cross-correlation with zero padding.
pub fn naive_conv(x: &Tensor<f64>, w: &Tensor<f64>, b: &Tensor<f64>, stride: usize, pad: usize) -> Tensor<f64> {
    let (n, c, h, wd) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    let (o, kh, kw) = (w.shape()[0], w.shape()[2], w.shape()[3]);
    let oh = (h + 2 * pad - kh) / stride + 1;
    let ow = (wd + 2 * pad - kw) / stride + 1;
    let xd = x.data();
    let wdat = w.data();
    let mut out = vec![0.0; n * o * oh * ow];
    for ni in 0..n {
        for oi in 0..o {
            for y in 0..oh {
                for xx in 0..ow {
                    let mut s = b.data()[oi];
                    for ci in 0..c {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let iy = (y * stride + ky) as isize - pad as isize;
                                let ix = (xx * stride + kx) as isize - pad as isize;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= wd as isize {
                                    continue;
                                }
                                let xv = xd[((ni * c + ci) * h + iy as usize) * wd + ix as usize];
                                s += xv * wdat[((oi * c + ci) * kh + ky) * kw + kx];
                            }
                        }
                    }
                    out[((ni * o + oi) * oh + y) * ow + xx] = s;
                }
            }
        }
    }
    Tensor::new(vec![n, o, oh, ow], out).unwrap()
}

/// 2×2 max by scanning each window; ties keep the first in row-major order.
pub fn naive_maxpool(x: &Tensor<f64>) -> Tensor<f64> {
    let (n, c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    let mut out = Vec::new();
    for ni in 0..n {
        for ci in 0..c {
            for y in 0..h / 2 {
                for xx in 0..w / 2 {
                    let mut best = f64::NEG_INFINITY;
                    for dy in 0..2 {
                        for dx in 0..2 {
                            let v = x.data()[((ni * c + ci) * h + 2 * y + dy) * w + 2 * xx + dx];
                            if v > best {
                                best = v;
                            }
                        }
                    }
                    out.push(best);
                }
            }
        }
    }
    Tensor::new(vec![n, c, h / 2, w / 2], out).unwrap()
}

/// Central differences of `f` with respect to every entry of `x`.
pub fn numeric_grad(x: &Tensor<f64>, h: f64, mut f: impl FnMut(&Tensor<f64>) -> f64) -> Vec<f64> {
    let mut probe = x.clone();
    (0..x.len())
        .map(|i| {
            let orig = probe.data()[i];
            probe.data_mut()[i] = orig + h;
            let up = f(&probe);
            probe.data_mut()[i] = orig - h;
            let down = f(&probe);
            probe.data_mut()[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `‖a − b‖ / (‖a‖ + ‖b‖)`, 0 when both vanish.
pub fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na + nb == 0.0 {
        0.0
    } else {
        diff / (na + nb)
    }
}

pub fn dot(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

/// Random small chain: 1–3 conv blocks (each conv, relu, optional pool),
/// flatten, dense. Input is 1–3 channels at 8×8 or 4×4.
pub fn random_specs(rng: &mut ChaCha8Rng) -> ([usize; 3], Vec<LayerSpec>) {
    let c = rng.gen_range(1..=3);
    let mut hw: usize = if rng.gen_bool(0.5) { 8 } else { 4 };
    let input = [c, hw, hw];
    let mut layers = Vec::new();
    for _ in 0..rng.gen_range(1..=3) {
        let k = if rng.gen_bool(0.7) { 3 } else { 1 };
        layers.push(LayerSpec::Conv {
            out_channels: rng.gen_range(2..=6),
            kernel: (k, k),
            stride: 1,
            padding: k / 2,
        });
        if rng.gen_bool(0.8) {
            layers.push(LayerSpec::Relu);
        }
        if hw >= 4 && rng.gen_bool(0.5) {
            layers.push(LayerSpec::MaxPool2);
            hw /= 2;
        }
    }
    layers.push(LayerSpec::Flatten);
    layers.push(LayerSpec::dense(rng.gen_range(2..=5)));
    (input, layers)
}

/// A random valid plan touching at least one conv layer; never empties a layer.
pub fn random_plan<T: prunelab::Scalar>(model: &Model<T>, rng: &mut ChaCha8Rng) -> PrunePlan {
    let convs = model.conv_layer_ids();
    let mut removals = Vec::new();
    let forced = convs[rng.gen_range(0..convs.len())];
    for &l in &convs {
        if l != forced && rng.gen_bool(0.5) {
            continue;
        }
        let n = model.filter_count(l).unwrap();
        let m = rng.gen_range(1..n);
        let mut ids: Vec<usize> = (0..n).collect();
        for i in 0..m {
            let j = rng.gen_range(i..n);
            ids.swap(i, j);
        }
        removals.extend(ids[..m].iter().map(|&f| FilterId::new(l, f)));
    }
    PrunePlan::new(model, removals).unwrap()
}

/// Optimal quotas by exhaustive search: minimum of
/// `Σ (q_c·S − m·s_c)²` over `0 ≤ q_c ≤ s_c − 1`, `Σ q = m`.
pub fn brute_force_quota_cost(sizes: &[usize], m: usize) -> Option<i128> {
    let total: i128 = sizes.iter().map(|&s| s as i128).sum();
    fn go(sizes: &[usize], left: usize, total: i128, m: usize, acc: i128, best: &mut Option<i128>) {
        let Some((&s, rest)) = sizes.split_first() else {
            if left == 0 {
                *best = Some(best.map_or(acc, |b: i128| b.min(acc)));
            }
            return;
        };
        for q in 0..=left.min(s.saturating_sub(1)) {
            let d = q as i128 * total - m as i128 * s as i128;
            go(rest, left - q, total, m, acc + d * d, best);
        }
    }
    let mut best = None;
    go(sizes, m, total, m, 0, &mut best);
    best
}

pub fn quota_cost(sizes: &[usize], quotas: &[usize], m: usize) -> i128 {
    let total: i128 = sizes.iter().map(|&s| s as i128).sum();
    sizes
        .iter()
        .zip(quotas)
        .map(|(&s, &q)| {
            let d = q as i128 * total - m as i128 * s as i128;
            d * d
        })
        .sum()
}

/// Conv(`filters`, kernel covering the full input) → flatten → dense(`classes`)
/// with every dense row block of a channel set to `v[i][j] / (H'·W')`, so the
/// logits read the spatial mean of each channel. Returns the model and `v`.
pub fn global_mean_chain(filters: usize, classes: usize, seed: u64) -> (Model<f64>, Vec<Vec<f64>>) {
    let mut r = rng(seed);
    let input = [2, 6, 6];
    let layers = vec![
        LayerSpec::Conv {
            out_channels: filters,
            kernel: (3, 3),
            stride: 1,
            padding: 0,
        },
        LayerSpec::Flatten,
        LayerSpec::dense(classes),
    ];
    let mut m = Model::<f64>::build(&layers, input, seed).unwrap();
    let plane = 4 * 4;
    let v: Vec<Vec<f64>> = (0..filters)
        .map(|_| (0..classes).map(|_| r.gen_range(-1.0..1.0)).collect())
        .collect();
    let d = m.dense_mut(2).unwrap();
    for i in 0..filters {
        for p in 0..plane {
            for j in 0..classes {
                d.weights.data_mut()[(i * plane + p) * classes + j] = v[i][j] / plane as f64;
            }
        }
    }
    (m, v)
}

/// Eight-filter first conv layer with two planted duplicate pairs `{0, 5}`
/// and `{2, 7}`, scaled so both pairs have the largest ℓ1 norms.
pub fn planted_duplicates(seed: u64) -> Model<f32> {
    let layers = prunelab::model::toy_model_specs(8, 4);
    let mut m = Model::<f32>::build(&layers, [3, 8, 8], seed).unwrap();
    let p: &mut ConvParams<f32> = m.conv_mut(0).unwrap();
    let per = p.weights.len() / 8;
    for (src, dst) in [(0usize, 5usize), (2, 7)] {
        for k in 0..per {
            let v = p.weights.data()[src * per + k] * 4.0;
            p.weights.data_mut()[src * per + k] = v;
            p.weights.data_mut()[dst * per + k] = v;
        }
        let b = p.bias.data()[src];
        p.bias.data_mut()[dst] = b;
    }
    m
}

pub const DUPLICATES: [usize; 4] = [0, 2, 5, 7];

/// Weights (`weight = true`) or bias of a parameterized layer.
pub fn param_mut(model: &mut Model<f64>, layer: usize, weight: bool) -> &mut [f64] {
    if model.layers()[layer].is_conv() {
        let p = model.conv_mut(layer).unwrap();
        if weight {
            p.weights.data_mut()
        } else {
            p.bias.data_mut()
        }
    } else {
        let p = model.dense_mut(layer).expect("parameterized layer");
        if weight {
            p.weights.data_mut()
        } else {
            p.bias.data_mut()
        }
    }
}
