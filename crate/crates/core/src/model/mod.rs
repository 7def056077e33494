//! Feed-forward CNN: layer chain, parameters, initialization, training step,
//! activation probes and checkpoints.

mod arch;
mod checkpoint;
mod pass;
mod sgd;

pub use arch::{toy_model_specs, vgg_mini_specs, Architecture};
pub use checkpoint::{
    checkpoint_digest, load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint,
    CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use pass::{Capture, Gradients, ParamGrads};

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{conv_output_hw, ConvParams, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayerSpec {
    Conv {
        out_channels: usize,
        kernel: (usize, usize),
        stride: usize,
        padding: usize,
    },
    Relu,
    MaxPool2,
    Flatten,
    Dense {
        out_features: usize,
    },
}

impl LayerSpec {
    /// 3×3, stride 1, padding 1.
    pub fn conv3(out_channels: usize) -> Self {
        LayerSpec::Conv {
            out_channels,
            kernel: (3, 3),
            stride: 1,
            padding: 1,
        }
    }

    pub fn dense(out_features: usize) -> Self {
        LayerSpec::Dense { out_features }
    }

    pub fn is_conv(&self) -> bool {
        matches!(self, LayerSpec::Conv { .. })
    }

    fn has_params(&self) -> bool {
        matches!(self, LayerSpec::Conv { .. } | LayerSpec::Dense { .. })
    }

    /// Per-sample output shape for a given per-sample input shape.
    fn output_shape(&self, input: &[usize]) -> std::result::Result<Vec<usize>, String> {
        match *self {
            LayerSpec::Conv {
                out_channels,
                kernel,
                stride,
                padding,
            } => {
                let &[_, h, w] = input else {
                    return Err(format!("conv needs a [C,H,W] input, got {input:?}"));
                };
                if out_channels == 0 || kernel.0 == 0 || kernel.1 == 0 || stride == 0 {
                    return Err("channels, kernel dims and stride must be >= 1".into());
                }
                let (oh, ow) = conv_output_hw((h, w), kernel, stride, padding).map_err(|e| e.to_string())?;
                Ok(vec![out_channels, oh, ow])
            }
            LayerSpec::Relu => Ok(input.to_vec()),
            LayerSpec::MaxPool2 => {
                let &[c, h, w] = input else {
                    return Err(format!("maxpool2 needs a [C,H,W] input, got {input:?}"));
                };
                if h % 2 != 0 || w % 2 != 0 {
                    return Err(format!("odd spatial dims {h}x{w}"));
                }
                Ok(vec![c, h / 2, w / 2])
            }
            LayerSpec::Flatten => {
                if input.len() != 3 {
                    return Err(format!("flatten needs a [C,H,W] input, got {input:?}"));
                }
                Ok(vec![input.iter().product()])
            }
            LayerSpec::Dense { out_features } => {
                if input.len() != 1 {
                    return Err(format!("dense needs a flat input, got {input:?}"));
                }
                if out_features == 0 {
                    return Err("out_features must be >= 1".into());
                }
                Ok(vec![out_features])
            }
        }
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerSpec::Conv {
                out_channels,
                kernel,
                stride,
                padding,
            } => write!(f, "conv {out_channels} {}x{} s{stride} p{padding}", kernel.0, kernel.1),
            LayerSpec::Relu => f.write_str("relu"),
            LayerSpec::MaxPool2 => f.write_str("maxpool2"),
            LayerSpec::Flatten => f.write_str("flatten"),
            LayerSpec::Dense { out_features } => write!(f, "dense {out_features}"),
        }
    }
}

impl FromStr for LayerSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Header(format!("unrecognized layer spec {s:?}"));
        let parts: Vec<&str> = s.split_whitespace().collect();
        let num = |t: &str, prefix: &str| -> Result<usize> {
            t.strip_prefix(prefix).and_then(|v| v.parse().ok()).ok_or_else(bad)
        };
        match parts.as_slice() {
            ["relu"] => Ok(LayerSpec::Relu),
            ["maxpool2"] => Ok(LayerSpec::MaxPool2),
            ["flatten"] => Ok(LayerSpec::Flatten),
            ["dense", n] => Ok(LayerSpec::Dense {
                out_features: num(n, "")?,
            }),
            ["conv", n, k, st, pd] => {
                let (kh, kw) = k.split_once('x').ok_or_else(bad)?;
                Ok(LayerSpec::Conv {
                    out_channels: num(n, "")?,
                    kernel: (num(kh, "")?, num(kw, "")?),
                    stride: num(st, "s")?,
                    padding: num(pd, "p")?,
                })
            }
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams<T> {
    /// `[in_features, out_features]`
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerParams<T> {
    None,
    Conv(ConvParams<T>),
    Dense(DenseParams<T>),
}

impl<T: Scalar> LayerParams<T> {
    pub fn tensors(&self) -> Option<(&Tensor<T>, &Tensor<T>)> {
        match self {
            LayerParams::None => None,
            LayerParams::Conv(p) => Some((&p.weights, &p.bias)),
            LayerParams::Dense(p) => Some((&p.weights, &p.bias)),
        }
    }

    fn tensors_mut(&mut self) -> Option<(&mut Tensor<T>, &mut Tensor<T>)> {
        match self {
            LayerParams::None => None,
            LayerParams::Conv(p) => Some((&mut p.weights, &mut p.bias)),
            LayerParams::Dense(p) => Some((&mut p.weights, &mut p.bias)),
        }
    }

    fn cast<U: Scalar>(&self) -> LayerParams<U> {
        match self {
            LayerParams::None => LayerParams::None,
            LayerParams::Conv(p) => LayerParams::Conv(ConvParams {
                weights: p.weights.cast(),
                bias: p.bias.cast(),
                stride: p.stride,
                padding: p.padding,
            }),
            LayerParams::Dense(p) => LayerParams::Dense(DenseParams {
                weights: p.weights.cast(),
                bias: p.bias.cast(),
            }),
        }
    }
}

/// A type-checked feed-forward chain with its parameters.
///
/// Parameters are mutated only through [`Model::sgd_step`], the explicit
/// `*_mut` accessors, and pruning surgery.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    input_shape: [usize; 3],
    layers: Vec<LayerSpec>,
    params: Vec<LayerParams<T>>,
    velocity: Vec<Option<ParamGrads<T>>>,
    seed: u64,
    step: u64,
}

/// Per-sample shapes of every activation: `[input, out(layer 0), ...]`.
pub fn infer_shapes(input_shape: [usize; 3], layers: &[LayerSpec]) -> Result<Vec<Vec<usize>>> {
    if input_shape.iter().any(|&d| d == 0) {
        return Err(Error::InvalidArgument(format!(
            "input shape must be positive, got {input_shape:?}"
        )));
    }
    let mut shapes = vec![input_shape.to_vec()];
    for (index, layer) in layers.iter().enumerate() {
        let next = layer
            .output_shape(shapes.last().unwrap())
            .map_err(|reason| Error::LayerChain {
                index,
                layer: layer.to_string(),
                reason,
            })?;
        shapes.push(next);
    }
    Ok(shapes)
}

fn check_chain(input_shape: [usize; 3], layers: &[LayerSpec]) -> Result<Vec<Vec<usize>>> {
    let shapes = infer_shapes(input_shape, layers)?;
    match layers.last() {
        Some(LayerSpec::Dense { .. }) => Ok(shapes),
        Some(other) => Err(Error::LayerChain {
            index: layers.len() - 1,
            layer: other.to_string(),
            reason: "the final layer must be dense (class logits)".into(),
        }),
        None => Err(Error::InvalidArgument("empty layer chain".into())),
    }
}

impl<T: Scalar> Model<T> {
    /// Builds a model with He-uniform weights (`±sqrt(6 / fan_in)`) and zero
    /// biases, drawn from a ChaCha8 stream seeded with `seed`.
    pub fn build(layers: &[LayerSpec], input_shape: [usize; 3], seed: u64) -> Result<Self> {
        let shapes = check_chain(input_shape, layers)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(layers.len());
        for (layer, in_shape) in layers.iter().zip(&shapes) {
            let p = match *layer {
                LayerSpec::Conv {
                    out_channels,
                    kernel: (kh, kw),
                    stride,
                    padding,
                } => {
                    let fan_in = in_shape[0] * kh * kw;
                    let w = he_uniform(&mut rng, &[out_channels, in_shape[0], kh, kw], fan_in);
                    LayerParams::Conv(ConvParams::new(w, Tensor::zeros(&[out_channels]), stride, padding)?)
                }
                LayerSpec::Dense { out_features } => {
                    let fan_in = in_shape[0];
                    LayerParams::Dense(DenseParams {
                        weights: he_uniform(&mut rng, &[fan_in, out_features], fan_in),
                        bias: Tensor::zeros(&[out_features]),
                    })
                }
                _ => LayerParams::None,
            };
            params.push(p);
        }
        Ok(Model {
            input_shape,
            velocity: vec![None; layers.len()],
            layers: layers.to_vec(),
            params,
            seed,
            step: 0,
        })
    }

    /// Assembles a model from explicit parameters, validating every shape.
    pub fn from_parts(
        input_shape: [usize; 3],
        layers: Vec<LayerSpec>,
        params: Vec<LayerParams<T>>,
        seed: u64,
        step: u64,
    ) -> Result<Self> {
        let shapes = check_chain(input_shape, &layers)?;
        if params.len() != layers.len() {
            return Err(Error::InvalidArgument(format!(
                "{} parameter entries for {} layers",
                params.len(),
                layers.len()
            )));
        }
        for (index, (layer, p)) in layers.iter().zip(&params).enumerate() {
            let in_shape = &shapes[index];
            let ok = match (layer, p) {
                (
                    LayerSpec::Conv {
                        out_channels,
                        kernel,
                        stride,
                        padding,
                    },
                    LayerParams::Conv(cp),
                ) => {
                    cp.weights.shape() == [*out_channels, in_shape[0], kernel.0, kernel.1]
                        && cp.bias.shape() == [*out_channels]
                        && cp.stride == *stride
                        && cp.padding == *padding
                }
                (LayerSpec::Dense { out_features }, LayerParams::Dense(dp)) => {
                    dp.weights.shape() == [in_shape[0], *out_features] && dp.bias.shape() == [*out_features]
                }
                (l, LayerParams::None) => !l.has_params(),
                _ => false,
            };
            if !ok {
                return Err(Error::LayerChain {
                    index,
                    layer: layer.to_string(),
                    reason: "parameter shapes disagree with the layer spec".into(),
                });
            }
        }
        Ok(Model {
            input_shape,
            velocity: vec![None; layers.len()],
            layers,
            params,
            seed,
            step,
        })
    }

    pub fn input_shape(&self) -> [usize; 3] {
        self.input_shape
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn params(&self) -> &[LayerParams<T>] {
        &self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn set_step(&mut self, step: u64) {
        self.step = step;
    }

    pub fn class_count(&self) -> usize {
        match self.layers.last() {
            Some(LayerSpec::Dense { out_features }) => *out_features,
            _ => unreachable!("chain validated at construction"),
        }
    }

    /// Per-sample activation shapes; entry `i + 1` is the output of layer `i`.
    pub fn shapes(&self) -> Vec<Vec<usize>> {
        infer_shapes(self.input_shape, &self.layers).expect("model chain is validated")
    }

    pub fn conv_layer_ids(&self) -> Vec<usize> {
        (0..self.layers.len()).filter(|&l| self.layers[l].is_conv()).collect()
    }

    pub fn conv(&self, layer_id: usize) -> Result<&ConvParams<T>> {
        match self.params.get(layer_id) {
            Some(LayerParams::Conv(p)) => Ok(p),
            Some(_) => Err(Error::NotConv { layer_id }),
            None => Err(self.out_of_range(layer_id)),
        }
    }

    /// Mutable conv parameters. Callers must keep the tensor shapes intact.
    pub fn conv_mut(&mut self, layer_id: usize) -> Result<&mut ConvParams<T>> {
        let count = self.layers.len();
        match self.params.get_mut(layer_id) {
            Some(LayerParams::Conv(p)) => Ok(p),
            Some(_) => Err(Error::NotConv { layer_id }),
            None => Err(Error::LayerOutOfRange {
                layer_id,
                layer_count: count,
            }),
        }
    }

    pub fn dense(&self, layer_id: usize) -> Option<&DenseParams<T>> {
        match self.params.get(layer_id) {
            Some(LayerParams::Dense(p)) => Some(p),
            _ => None,
        }
    }

    /// Mutable dense parameters. Callers must keep the tensor shapes intact.
    pub fn dense_mut(&mut self, layer_id: usize) -> Option<&mut DenseParams<T>> {
        match self.params.get_mut(layer_id) {
            Some(LayerParams::Dense(p)) => Some(p),
            _ => None,
        }
    }

    pub fn filter_count(&self, layer_id: usize) -> Result<usize> {
        Ok(self.conv(layer_id)?.out_channels())
    }

    pub fn parameter_count(&self) -> usize {
        self.params
            .iter()
            .filter_map(|p| p.tensors())
            .map(|(w, b)| w.len() + b.len())
            .sum()
    }

    /// Same architecture and values in another scalar type.
    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model {
            input_shape: self.input_shape,
            layers: self.layers.clone(),
            params: self.params.iter().map(|p| p.cast()).collect(),
            velocity: vec![None; self.layers.len()],
            seed: self.seed,
            step: self.step,
        }
    }

    pub fn reset_velocity(&mut self) {
        self.velocity = vec![None; self.layers.len()];
    }

    pub fn has_velocity(&self) -> bool {
        self.velocity.iter().any(|v| v.is_some())
    }

    /// Every parameter value in layer order, weights before bias.
    pub fn flat_params(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for (w, b) in self.params.iter().filter_map(|p| p.tensors()) {
            out.extend_from_slice(w.data());
            out.extend_from_slice(b.data());
        }
        out
    }

    #[cfg(test)]
    pub(crate) fn params_mut(&mut self) -> impl Iterator<Item = Option<(&mut Tensor<T>, &mut Tensor<T>)>> {
        self.params.iter_mut().map(|p| p.tensors_mut())
    }

    pub(crate) fn check_conv_filter(&self, layer_id: usize, filter_id: usize) -> Result<()> {
        let count = self.filter_count(layer_id)?;
        if filter_id >= count {
            return Err(Error::FilterOutOfRange {
                layer_id,
                filter_id,
                filter_count: count,
            });
        }
        Ok(())
    }

    fn out_of_range(&self, layer_id: usize) -> Error {
        Error::LayerOutOfRange {
            layer_id,
            layer_count: self.layers.len(),
        }
    }
}

fn he_uniform<T: Scalar>(rng: &mut ChaCha8Rng, shape: &[usize], fan_in: usize) -> Tensor<T> {
    let bound = (6.0 / fan_in as f64).sqrt();
    Tensor::from_fn(shape, |_| T::from_f64_lossy(rng.gen_range(-bound..bound)))
}
