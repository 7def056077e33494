use std::collections::BTreeMap;

use super::{LayerParams, LayerSpec, Model};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{
    conv2d_backward_input, conv2d_forward, dense_backward, dense_backward_input, dense_forward,
    maxpool2, maxpool2_backward, relu, relu_backward, Tensor,
};

/// Activations recorded during a forward pass; `acts[0]` is the input batch
/// and `acts[i + 1]` the output of layer `i`.
#[derive(Debug, Clone)]
pub struct Capture<T> {
    acts: Vec<Tensor<T>>,
    pool_indices: Vec<Option<Vec<usize>>>,
}

impl<T: Scalar> Capture<T> {
    pub fn activations(&self) -> &[Tensor<T>] {
        &self.acts
    }

    /// Output of layer `layer_id`.
    pub fn output(&self, layer_id: usize) -> Option<&Tensor<T>> {
        self.acts.get(layer_id + 1)
    }

    pub fn logits(&self) -> &Tensor<T> {
        self.acts.last().expect("capture holds at least the input")
    }

    /// Number of layers evaluated.
    pub fn depth(&self) -> usize {
        self.acts.len() - 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads<T> {
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

/// Per-layer parameter gradients (`None` for parameter-free layers) and,
/// when requested, the gradient with respect to the input batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<Option<ParamGrads<T>>>,
    pub input: Option<Tensor<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .flatten()
            .all(|g| g.weights.is_finite() && g.bias.is_finite())
    }
}

impl<T: Scalar> Model<T> {
    fn check_batch(&self, batch: &Tensor<T>) -> Result<()> {
        let [c, h, w] = self.input_shape;
        if batch.ndim() != 4 || batch.shape()[1..] != [c, h, w] {
            let n = batch.shape().first().copied().unwrap_or(0);
            return Err(Error::ShapeMismatch {
                op: "model forward (batch)",
                expected: vec![n, c, h, w],
                actual: batch.shape().to_vec(),
            });
        }
        Ok(())
    }

    fn layer_forward(&self, layer_id: usize, x: &Tensor<T>) -> Result<(Tensor<T>, Option<Vec<usize>>)> {
        Ok(match (&self.layers[layer_id], &self.params[layer_id]) {
            (LayerSpec::Conv { .. }, LayerParams::Conv(p)) => (conv2d_forward(x, p)?, None),
            (LayerSpec::Relu, _) => (relu(x), None),
            (LayerSpec::MaxPool2, _) => {
                let (y, idx) = maxpool2(x)?;
                (y, Some(idx))
            }
            (LayerSpec::Flatten, _) => {
                let n = x.shape()[0];
                let d = x.len() / n.max(1);
                (x.clone().reshape(&[n, d])?, None)
            }
            (LayerSpec::Dense { .. }, LayerParams::Dense(p)) => (dense_forward(x, &p.weights, &p.bias)?, None),
            _ => unreachable!("layer/param kinds validated at construction"),
        })
    }

    /// Runs layers `0..=last_layer` and records every activation.
    pub fn forward_until(&self, batch: &Tensor<T>, last_layer: usize) -> Result<Capture<T>> {
        self.forward_impl(batch, last_layer, None)
    }

    fn forward_impl(
        &self,
        batch: &Tensor<T>,
        last_layer: usize,
        masks: Option<&BTreeMap<usize, Vec<usize>>>,
    ) -> Result<Capture<T>> {
        self.check_batch(batch)?;
        if last_layer >= self.layers.len() {
            return Err(self.out_of_range(last_layer));
        }
        let mut acts = Vec::with_capacity(last_layer + 2);
        let mut pool_indices = Vec::with_capacity(last_layer + 1);
        acts.push(batch.clone());
        for l in 0..=last_layer {
            let (mut y, idx) = self.layer_forward(l, acts.last().unwrap())?;
            if let Some(channels) = masks.and_then(|m| m.get(&l)) {
                zero_channels(&mut y, channels);
            }
            acts.push(y);
            pool_indices.push(idx);
        }
        Ok(Capture { acts, pool_indices })
    }

    /// Full forward pass with every intermediate activation kept.
    pub fn forward_capture(&self, batch: &Tensor<T>) -> Result<Capture<T>> {
        self.forward_until(batch, self.layers.len() - 1)
    }

    /// Logits `[N, K]`.
    pub fn forward(&self, batch: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_batch(batch)?;
        let mut x = batch.clone();
        for l in 0..self.layers.len() {
            x = self.layer_forward(l, &x)?.0;
        }
        Ok(x)
    }

    /// Forward pass in which the listed output channels of the given conv
    /// layers are forced to zero right after the convolution.
    pub fn forward_masked(&self, batch: &Tensor<T>, masks: &BTreeMap<usize, Vec<usize>>) -> Result<Tensor<T>> {
        for (&layer_id, channels) in masks {
            for &c in channels {
                self.check_conv_filter(layer_id, c)?;
            }
        }
        let cap = self.forward_impl(batch, self.layers.len() - 1, Some(masks))?;
        Ok(cap.acts.into_iter().last().unwrap())
    }

    /// Pre-ReLU feature maps `[N, H', W']` of one conv filter and their mean
    /// over batch and spatial positions.
    pub fn layer_activation(&self, batch: &Tensor<T>, layer_id: usize, filter_id: usize) -> Result<(Tensor<T>, T)> {
        self.check_conv_filter(layer_id, filter_id)?;
        let cap = self.forward_until(batch, layer_id)?;
        let out = cap.output(layer_id).unwrap();
        let maps = channel_maps(out, filter_id)?;
        let mean = maps.mean();
        Ok((maps, mean))
    }

    fn check_capture(&self, capture: &Capture<T>) -> Result<()> {
        let shapes = self.shapes();
        if capture.acts.len() > shapes.len() {
            return Err(Error::StaleCapture {
                layer_id: shapes.len() - 1,
            });
        }
        let n = capture.acts[0].shape()[0];
        for (i, act) in capture.acts.iter().enumerate() {
            if act.shape()[0] != n || act.shape()[1..] != shapes[i][..] {
                return Err(Error::StaleCapture {
                    layer_id: i.saturating_sub(1),
                });
            }
        }
        Ok(())
    }

    /// Propagates `grad` (with respect to the output of layer `top`) down
    /// through layers `top..=bottom`, returning the gradient with respect to
    /// the input of layer `bottom`. Parameter gradients are written to
    /// `sink` when given. When `need_bottom_input` is false the input
    /// gradient of the bottom layer is not computed and `None` is returned.
    fn propagate(
        &self,
        capture: &Capture<T>,
        top: usize,
        mut grad: Tensor<T>,
        bottom: usize,
        mut sink: Option<&mut Vec<Option<ParamGrads<T>>>>,
        need_bottom_input: bool,
    ) -> Result<Option<Tensor<T>>> {
        self.check_capture(capture)?;
        if top >= capture.depth() {
            return Err(Error::StaleCapture { layer_id: top });
        }
        grad.expect_shape("model backward (seed gradient)", capture.acts[top + 1].shape())?;
        for l in (bottom..=top).rev() {
            let x = &capture.acts[l];
            let need_input = l > bottom || need_bottom_input;
            let next = match (&self.layers[l], &self.params[l]) {
                (LayerSpec::Conv { .. }, LayerParams::Conv(p)) => {
                    if let Some(sink) = sink.as_deref_mut() {
                        let (gw, gb) = crate::tensor::conv2d_backward_params(x, p, &grad)?;
                        sink[l] = Some(ParamGrads { weights: gw, bias: gb });
                    }
                    need_input.then(|| conv2d_backward_input(x.shape(), p, &grad)).transpose()?
                }
                (LayerSpec::Relu, _) => Some(relu_backward(x, &grad)?),
                (LayerSpec::MaxPool2, _) => {
                    let idx = capture.pool_indices[l].as_ref().expect("pool indices captured");
                    Some(maxpool2_backward(x.shape(), idx, &grad)?)
                }
                (LayerSpec::Flatten, _) => Some(grad.reshape(x.shape())?),
                (LayerSpec::Dense { .. }, LayerParams::Dense(p)) => {
                    if let Some(sink) = sink.as_deref_mut() {
                        let (gi, gw, gb) = dense_backward(x, &p.weights, &p.bias, &grad)?;
                        sink[l] = Some(ParamGrads { weights: gw, bias: gb });
                        Some(gi)
                    } else {
                        need_input.then(|| dense_backward_input(&p.weights, &grad)).transpose()?
                    }
                }
                _ => unreachable!("layer/param kinds validated at construction"),
            };
            match next {
                Some(g) => grad = g,
                None => return Ok(None),
            }
        }
        Ok(Some(grad))
    }

    /// Chain-rule composition of every layer's backward pass.
    pub fn backward(&self, capture: &Capture<T>, grad_logits: &Tensor<T>, want_input_grad: bool) -> Result<Gradients<T>> {
        let top = self.layers.len() - 1;
        if capture.depth() != self.layers.len() {
            return Err(Error::StaleCapture { layer_id: top });
        }
        let mut layers = vec![None; self.layers.len()];
        let input = self.propagate(capture, top, grad_logits.clone(), 0, Some(&mut layers), want_input_grad)?;
        Ok(Gradients { layers, input })
    }

    /// Gradient with respect to the input batch of a cotangent placed at the
    /// output of `layer_id`; parameter gradients are not formed.
    pub fn input_gradient(&self, capture: &Capture<T>, layer_id: usize, grad: Tensor<T>) -> Result<Tensor<T>> {
        Ok(self
            .propagate(capture, layer_id, grad, 0, None, true)?
            .expect("input gradient requested"))
    }

    /// Gradient with respect to the output of `target_layer` of a cotangent
    /// placed at the output of `from_layer` (`from_layer > target_layer`).
    pub fn output_gradient(
        &self,
        capture: &Capture<T>,
        from_layer: usize,
        grad: Tensor<T>,
        target_layer: usize,
    ) -> Result<Tensor<T>> {
        if target_layer >= from_layer {
            return Ok(grad);
        }
        Ok(self
            .propagate(capture, from_layer, grad, target_layer + 1, None, true)?
            .expect("input gradient requested"))
    }
}

/// Channel `c` of a `[N, C, H, W]` tensor as `[N, H, W]`.
pub(crate) fn channel_maps<T: Scalar>(t: &Tensor<T>, c: usize) -> Result<Tensor<T>> {
    t.expect_rank("channel maps", 4)?;
    let &[n, channels, h, w] = t.shape() else { unreachable!() };
    if c >= channels {
        return Err(Error::InvalidShape {
            op: "channel maps",
            detail: format!("channel {c} of {channels}"),
        });
    }
    let plane = h * w;
    let mut data = Vec::with_capacity(n * plane);
    for i in 0..n {
        data.extend_from_slice(&t.item(i)[c * plane..(c + 1) * plane]);
    }
    Tensor::new(vec![n, h, w], data)
}

fn zero_channels<T: Scalar>(t: &mut Tensor<T>, channels: &[usize]) {
    let &[n, c, h, w] = t.shape() else {
        return;
    };
    let plane = h * w;
    let data = t.data_mut();
    for i in 0..n {
        for &ch in channels {
            let start = (i * c + ch) * plane;
            data[start..start + plane].fill(T::zero());
        }
    }
}
