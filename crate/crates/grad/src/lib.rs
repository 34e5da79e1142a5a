//! Reverse-mode automatic differentiation over dense CPU tensors.
//!
//! Just enough machinery to train small convolutional encoder/decoder and
//! discriminator networks: strided convolutions and their transposes, linear
//! layers, instance normalization, pointwise nonlinearities and reductions.
//! Everything is generic over [`Scalar`] so the same network code runs in
//! `f32` for training and `f64` for finite-difference verification.

pub mod conv;
pub mod graph;
pub mod optim;
pub mod params;
pub mod scalar;
pub mod tensor;

pub use graph::{Gradients, Graph, Var};
pub use optim::{Adam, AdamConfig};
pub use params::{Bound, ParamId, ParamSet};
pub use scalar::Scalar;
pub use tensor::Tensor;
