//! Finite-difference checks of every backward pass. Each `check_*` runs
//! `trials` randomized instances and returns the worst relative error.

use prunelab::model::{LayerSpec, Model};
use prunelab::tensor::{
    conv2d_backward, conv2d_forward, dense_backward, dense_forward, maxpool2, maxpool2_backward, relu, relu_backward,
    softmax_xent, ConvParams, Tensor,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{dot, numeric_grad, param_mut, random_specs, random_tensor, rel_error, rng};

pub const H: f64 = 1e-3;
pub const TOLERANCE: f64 = 1e-3;

pub fn check_conv(trials: usize, seed: u64) -> f64 {
    let mut worst: f64 = 0.0;
    for t in 0..trials {
        let mut r = rng(seed + t as u64);
        let (n, c, o) = (r.gen_range(1..=2), r.gen_range(1..=3), r.gen_range(1..=3));
        let k = r.gen_range(1..=3);
        let stride = r.gen_range(1..=2);
        let pad = r.gen_range(0..=k / 2 + 1);
        let hw = r.gen_range(k.max(3)..=6);
        let x = random_tensor(&[n, c, hw, hw], &mut r);
        let w = random_tensor(&[o, c, k, k], &mut r);
        let b = random_tensor(&[o], &mut r);
        let params = ConvParams::new(w.clone(), b.clone(), stride, pad).unwrap();
        let y = conv2d_forward(&x, &params).unwrap();
        let g = random_tensor(y.shape(), &mut r);
        let (gi, gw, gb) = conv2d_backward(&x, &params, &g).unwrap();
        let loss = |x: &Tensor<f64>, w: &Tensor<f64>, b: &Tensor<f64>| {
            dot(&conv2d_forward(x, &ConvParams::new(w.clone(), b.clone(), stride, pad).unwrap()).unwrap(), &g)
        };
        worst = worst
            .max(rel_error(gi.data(), &numeric_grad(&x, H, |x| loss(x, &w, &b))))
            .max(rel_error(gw.data(), &numeric_grad(&w, H, |w| loss(&x, w, &b))))
            .max(rel_error(gb.data(), &numeric_grad(&b, H, |b| loss(&x, &w, b))));
    }
    worst
}

/// Inputs keep away from the kink at 0 by more than `H`.
pub fn check_relu(trials: usize, seed: u64) -> f64 {
    let mut worst: f64 = 0.0;
    for t in 0..trials {
        let mut r = rng(seed + t as u64);
        let x = Tensor::from_fn(&[2, 3, 4, 4], |_| {
            let v: f64 = r.gen_range(0.05..1.0);
            if r.gen_bool(0.5) {
                v
            } else {
                -v
            }
        });
        let g = random_tensor(x.shape(), &mut r);
        let gi = relu_backward(&x, &g).unwrap();
        worst = worst.max(rel_error(gi.data(), &numeric_grad(&x, H, |x| dot(&relu(x), &g))));
    }
    worst
}

/// Window entries are separated by more than `2H` so the argmax is stable.
pub fn check_maxpool(trials: usize, seed: u64) -> f64 {
    let mut worst: f64 = 0.0;
    for t in 0..trials {
        let mut r = rng(seed + t as u64);
        let shape = [r.gen_range(1..=2), r.gen_range(1..=3), 4, 6];
        let len: usize = shape.iter().product();
        let mut values: Vec<f64> = (0..len).map(|i| i as f64 * 0.01).collect();
        for i in (1..len).rev() {
            values.swap(i, r.gen_range(0..=i));
        }
        let x = Tensor::new(shape.to_vec(), values).unwrap();
        let (y, idx) = maxpool2(&x).unwrap();
        let g = random_tensor(y.shape(), &mut r);
        let gi = maxpool2_backward(x.shape(), &idx, &g).unwrap();
        worst = worst.max(rel_error(gi.data(), &numeric_grad(&x, H, |x| dot(&maxpool2(x).unwrap().0, &g))));
    }
    worst
}

pub fn check_dense(trials: usize, seed: u64) -> f64 {
    let mut worst: f64 = 0.0;
    for t in 0..trials {
        let mut r = rng(seed + t as u64);
        let (n, d, m) = (r.gen_range(1..=4), r.gen_range(1..=6), r.gen_range(1..=5));
        let x = random_tensor(&[n, d], &mut r);
        let w = random_tensor(&[d, m], &mut r);
        let b = random_tensor(&[m], &mut r);
        let g = random_tensor(&[n, m], &mut r);
        let (gi, gw, gb) = dense_backward(&x, &w, &b, &g).unwrap();
        let loss = |x: &Tensor<f64>, w: &Tensor<f64>, b: &Tensor<f64>| dot(&dense_forward(x, w, b).unwrap(), &g);
        worst = worst
            .max(rel_error(gi.data(), &numeric_grad(&x, H, |x| loss(x, &w, &b))))
            .max(rel_error(gw.data(), &numeric_grad(&w, H, |w| loss(&x, w, &b))))
            .max(rel_error(gb.data(), &numeric_grad(&b, H, |b| loss(&x, &w, b))));
    }
    worst
}

pub fn check_softmax_xent(trials: usize, seed: u64) -> f64 {
    let mut worst: f64 = 0.0;
    for t in 0..trials {
        let mut r = rng(seed + t as u64);
        let (n, k) = (r.gen_range(1..=4), r.gen_range(2..=6));
        let z = Tensor::from_fn(&[n, k], |_| r.gen_range(-3.0..3.0));
        let labels: Vec<usize> = (0..n).map(|_| r.gen_range(0..k)).collect();
        let (_, g) = softmax_xent(&z, &labels).unwrap();
        worst = worst.max(rel_error(g.data(), &numeric_grad(&z, H, |z| softmax_xent(z, &labels).unwrap().0)));
    }
    worst
}

/// Which side of every ReLU kink and which entry of every pooling window
/// the forward pass of `x` lands on.
pub fn switch_pattern(model: &Model<f64>, x: &Tensor<f64>) -> Vec<usize> {
    let cap = model.forward_capture(x).unwrap();
    let mut out = Vec::new();
    for (l, spec) in model.layers().iter().enumerate() {
        let input = &cap.activations()[l];
        match spec {
            LayerSpec::Relu => out.extend(input.data().iter().map(|&v| (v > 0.0) as usize)),
            LayerSpec::MaxPool2 => {
                let &[n, c, h, w] = input.shape() else { unreachable!() };
                for plane in 0..n * c {
                    for y in (0..h).step_by(2) {
                        for xx in (0..w).step_by(2) {
                            let at = |k: usize| input.data()[(plane * h + y + k / 2) * w + xx + k % 2];
                            out.push((0..4).fold(0, |b, k| if at(k) > at(b) { k } else { b }));
                        }
                    }
                }
            }
            _ => {}
        }
    }
    out
}

/// Central differences over the model's parameters and input, or `None`
/// if any perturbation crosses a ReLU or pooling switch (the loss is not
/// differentiable there).
fn smooth_numeric(model: &Model<f64>, x: &Tensor<f64>, labels: &[usize]) -> Option<(Vec<f64>, Vec<Vec<f64>>)> {
    let base = switch_pattern(model, x);
    let eval = |m: &Model<f64>, x: &Tensor<f64>| -> Option<f64> {
        (switch_pattern(m, x) == base).then(|| softmax_xent(&m.forward(x).unwrap(), labels).unwrap().0)
    };
    let mut probe_x = x.clone();
    let mut input = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = probe_x.data()[i];
        probe_x.data_mut()[i] = orig + H;
        let up = eval(model, &probe_x)?;
        probe_x.data_mut()[i] = orig - H;
        let down = eval(model, &probe_x)?;
        probe_x.data_mut()[i] = orig;
        input.push((up - down) / (2.0 * H));
    }
    let mut params = Vec::new();
    let mut probe = model.clone();
    for (l, spec) in model.layers().iter().enumerate() {
        if !matches!(spec, LayerSpec::Conv { .. } | LayerSpec::Dense { .. }) {
            continue;
        }
        for weight in [true, false] {
            let len = param_mut(&mut probe, l, weight).len();
            let mut g = Vec::with_capacity(len);
            for i in 0..len {
                let orig = param_mut(&mut probe, l, weight)[i];
                param_mut(&mut probe, l, weight)[i] = orig + H;
                let up = eval(&probe, x)?;
                param_mut(&mut probe, l, weight)[i] = orig - H;
                let down = eval(&probe, x)?;
                param_mut(&mut probe, l, weight)[i] = orig;
                g.push((up - down) / (2.0 * H));
            }
            params.push(g);
        }
    }
    Some((input, params))
}

/// Cross-entropy of a random chain: gradient of every parameter tensor and
/// of the input batch. Batches whose finite differences would straddle a
/// ReLU or pooling switch are redrawn.
pub fn check_model(trials: usize, seed: u64) -> f64 {
    check_models(trials, seed, |r| {
        let (input, layers) = random_specs(r);
        (input, layers, r.gen_range(1..=2))
    })
}

/// Whole-model check on the conv8-relu-pool-conv8-relu-pool-flatten-dense10
/// toy with a two-image batch.
pub fn check_toy_model(trials: usize, seed: u64) -> f64 {
    check_models(trials, seed, |_| ([3, 8, 8], prunelab::model::toy_model_specs(8, 10), 2))
}

fn check_models(
    trials: usize,
    seed: u64,
    mut instance: impl FnMut(&mut ChaCha8Rng) -> ([usize; 3], Vec<LayerSpec>, usize),
) -> f64 {
    let mut worst: f64 = 0.0;
    for t in 0..trials {
        let mut r = rng(seed + t as u64);
        let (input, layers, n) = instance(&mut r);
        let mut model = Model::<f64>::build(&layers, input, seed + t as u64).unwrap();
        // zero biases would pin fully rectified receptive fields exactly at the kink
        for l in 0..layers.len() {
            if matches!(layers[l], LayerSpec::Conv { .. } | LayerSpec::Dense { .. }) {
                for b in param_mut(&mut model, l, false) {
                    *b = r.gen_range(0.1..0.5) * if r.gen_bool(0.5) { 1.0 } else { -1.0 };
                }
            }
        }
        let k = model.class_count();
        let labels: Vec<usize> = (0..n).map(|_| r.gen_range(0..k)).collect();
        let (x, (num_input, num_params)) = (0..500)
            .find_map(|_| {
                let x = random_tensor(&[n, input[0], input[1], input[2]], &mut r);
                smooth_numeric(&model, &x, &labels).map(|g| (x, g))
            })
            .expect("no batch with smooth finite differences found");
        let cap = model.forward_capture(&x).unwrap();
        let (_, gl) = softmax_xent(cap.logits(), &labels).unwrap();
        let grads = model.backward(&cap, &gl, true).unwrap();
        worst = worst.max(rel_error(grads.input.as_ref().unwrap().data(), &num_input));
        let analytic = grads.layers.iter().flatten().flat_map(|p| [&p.weights, &p.bias]);
        for (a, num) in analytic.zip(&num_params) {
            worst = worst.max(rel_error(a.data(), num));
        }
    }
    worst
}
