use super::{Gradients, Model, ParamGrads};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

impl<T: Scalar> Model<T> {
    /// Heavy-ball SGD: `v ← momentum·v + g`, `θ ← θ − lr·v`.
    ///
    /// Fails without touching the model when any gradient is non-finite.
    pub fn sgd_step(&mut self, grads: &Gradients<T>, lr: T, momentum: T) -> Result<()> {
        if !(lr > T::zero()) || !lr.is_finite() {
            return Err(Error::InvalidArgument(format!("learning rate must be > 0, got {lr}")));
        }
        if !(momentum >= T::zero() && momentum < T::one()) {
            return Err(Error::InvalidArgument(format!("momentum must lie in [0, 1), got {momentum}")));
        }
        if grads.layers.len() != self.layers.len() {
            return Err(Error::InvalidArgument(format!(
                "{} gradient entries for {} layers",
                grads.layers.len(),
                self.layers.len()
            )));
        }
        if !grads.is_finite() {
            return Err(Error::NonFinite {
                context: format!("gradients at step {}", self.step),
            });
        }
        for (l, g) in grads.layers.iter().enumerate() {
            let (Some(g), Some((w, b))) = (g, self.params[l].tensors()) else {
                continue;
            };
            g.weights.expect_shape("sgd_step (weight grad)", w.shape())?;
            g.bias.expect_shape("sgd_step (bias grad)", b.shape())?;
        }
        let velocity = &mut self.velocity;
        for ((l, slot), g) in self.params.iter_mut().enumerate().zip(&grads.layers) {
            let (Some(g), Some((w, b))) = (g, slot.tensors_mut()) else {
                continue;
            };
            let v = velocity[l].get_or_insert_with(|| ParamGrads {
                weights: Tensor::zeros(g.weights.shape()),
                bias: Tensor::zeros(g.bias.shape()),
            });
            update(w, &mut v.weights, &g.weights, lr, momentum);
            update(b, &mut v.bias, &g.bias, lr, momentum);
        }
        self.step += 1;
        Ok(())
    }
}

fn update<T: Scalar>(param: &mut Tensor<T>, velocity: &mut Tensor<T>, grad: &Tensor<T>, lr: T, momentum: T) {
    for ((p, v), &g) in param
        .data_mut()
        .iter_mut()
        .zip(velocity.data_mut().iter_mut())
        .zip(grad.data())
    {
        *v = momentum * *v + g;
        *p = *p - lr * *v;
    }
}
