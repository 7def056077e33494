//! Filter-pruning laboratory for small convolutional networks.

pub mod am;
pub mod data;
pub mod error;
pub mod harness;
pub mod model;
pub mod parallel;
pub mod prune;
pub mod scalar;
pub mod tensor;

pub use error::{Error, Result};
pub use model::{LayerSpec, Model};
pub use scalar::Scalar;
pub use tensor::Tensor;

pub type Tensor32 = Tensor<f32>;
pub type Tensor64 = Tensor<f64>;
pub type Model32 = Model<f32>;
pub type Model64 = Model<f64>;
