//! Activation maximization: gradient ascent in input space on one filter's
//! mean pre-ReLU response, `X ← X + η·∂A/∂X`, starting from seeded noise.

mod pattern;
mod pnm;

pub use pattern::{pattern_distance, pattern_vector, standardize};
pub use pnm::{encode_grid, encode_pattern, export_grid_ppm, export_pattern_ppm, grid_dims, PnmImage};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::Model;
use crate::parallel;
use crate::scalar::Scalar;
use crate::tensor::{conv2d_backward_input, conv2d_forward, ConvParams, Tensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmConfig {
    /// Ascent step size.
    pub eta: f64,
    pub iterations: usize,
    pub seed: u64,
    /// Initial noise is uniform in `[-init_scale, init_scale]`.
    pub init_scale: f64,
    /// Rescale each gradient to unit L2 norm before stepping.
    pub normalize_grad: bool,
}

impl Default for AmConfig {
    fn default() -> Self {
        AmConfig {
            eta: 0.1,
            iterations: 256,
            seed: 0,
            init_scale: 0.1,
            normalize_grad: true,
        }
    }
}

impl AmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::InvalidArgument(format!("AM eta must be > 0, got {}", self.eta)));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidArgument("AM iterations must be >= 1".into()));
        }
        if !(self.init_scale >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "AM init_scale must be >= 0, got {}",
                self.init_scale
            )));
        }
        Ok(())
    }
}

/// Synthesized input for one filter plus the activation after every step.
#[derive(Debug, Clone, PartialEq)]
pub struct Pattern<T> {
    pub layer_id: usize,
    pub filter_id: usize,
    /// `[C, H, W]`, same as the model input.
    pub image: Tensor<T>,
    /// `iterations + 1` entries; the first is the activation of the noise.
    pub activation_trace: Vec<T>,
    pub config: AmConfig,
}

impl<T: Scalar> Pattern<T> {
    pub fn initial_activation(&self) -> T {
        self.activation_trace[0]
    }

    pub fn final_activation(&self) -> T {
        *self.activation_trace.last().unwrap()
    }
}

/// The seeded starting image `[1, C, H, W]`.
pub fn initial_image<T: Scalar>(input_shape: [usize; 3], cfg: &AmConfig) -> Tensor<T> {
    let [c, h, w] = input_shape;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let s = cfg.init_scale;
    Tensor::from_fn(&[1, c, h, w], |_| {
        if s > 0.0 {
            T::from_f64_lossy(rng.gen_range(-s..=s))
        } else {
            T::zero()
        }
    })
}

// Below this norm a gradient is treated as zero and not rescaled.
const MIN_GRAD_NORM: f64 = 1e-12;

pub fn activation_maximize<T: Scalar>(model: &Model<T>, layer_id: usize, filter_id: usize, cfg: &AmConfig) -> Result<Pattern<T>> {
    cfg.validate()?;
    model.check_conv_filter(layer_id, filter_id)?;
    let mut x = initial_image::<T>(model.input_shape(), cfg);
    let eta = T::from_f64_lossy(cfg.eta);
    let mut trace = Vec::with_capacity(cfg.iterations + 1);
    // only the probed filter of the probed layer is evaluated
    let conv = model.conv(layer_id)?;
    let single = ConvParams::new(
        Tensor::new(
            vec![1, conv.in_channels(), conv.kernel().0, conv.kernel().1],
            conv.filter(filter_id).to_vec(),
        )?,
        Tensor::new(vec![1], vec![conv.bias.data()[filter_id]])?,
        conv.stride,
        conv.padding,
    )?;

    for it in 0..=cfg.iterations {
        let below = match layer_id {
            0 => None,
            l => Some(model.forward_until(&x, l - 1)?),
        };
        let input = below.as_ref().map_or(&x, |cap| cap.output(layer_id - 1).unwrap());
        let out = conv2d_forward(input, &single)?;
        let plane = out.len();
        let activation = out.data().iter().copied().sum::<T>() / T::from_usize(plane).unwrap();
        trace.push(activation);
        if it == cfg.iterations {
            break;
        }

        let seed = Tensor::full(out.shape(), T::one() / T::from_usize(plane).unwrap());
        let at_input = conv2d_backward_input(input.shape(), &single, &seed)?;
        let mut grad = match &below {
            Some(cap) => model.input_gradient(cap, layer_id - 1, at_input)?,
            None => at_input,
        };
        if cfg.normalize_grad {
            let norm = grad.l2_norm();
            if norm.as_f64() > MIN_GRAD_NORM {
                grad = grad.map(|g| g / norm);
            }
        }
        for (xi, &gi) in x.data_mut().iter_mut().zip(grad.data()) {
            *xi = *xi + eta * gi;
        }
        if !x.is_finite() {
            return Err(Error::NonFinite {
                context: format!("activation maximization of layer {layer_id} filter {filter_id} at step {}", it + 1),
            });
        }
    }

    let [c, h, w] = model.input_shape();
    Ok(Pattern {
        layer_id,
        filter_id,
        image: x.reshape(&[c, h, w])?,
        activation_trace: trace,
        config: *cfg,
    })
}

/// Independent runs for several filters of one layer, in parallel; each
/// result is identical to the corresponding single run.
pub fn activation_maximize_many<T: Scalar>(
    model: &Model<T>,
    layer_id: usize,
    filters: &[usize],
    cfg: &AmConfig,
) -> Result<Vec<Pattern<T>>> {
    parallel::map_ordered(filters, |&f| activation_maximize(model, layer_id, f, cfg))
        .into_iter()
        .collect()
}

/// Patterns for every filter of a conv layer.
pub fn layer_patterns<T: Scalar>(model: &Model<T>, layer_id: usize, cfg: &AmConfig) -> Result<Vec<Pattern<T>>> {
    let filters: Vec<usize> = (0..model.filter_count(layer_id)?).collect();
    activation_maximize_many(model, layer_id, &filters, cfg)
}
