//! Small CPU neural-network engine with exact reverse-mode gradients.
//!
//! Layers cache what they need during `forward` and consume it in `backward`,
//! so every backward call must follow exactly one forward call.

mod activation;
pub mod checkpoint;
mod conv;
mod dense;
mod layer;
mod loss;
mod norm;
mod pool;
mod scalar;
mod tensor;

use rand::Rng;
use thiserror::Error;

pub use activation::{elu, relu, Activation, ActivationKind};
pub use conv::Conv2d;
pub use dense::{Dense, Dropout, Flatten};
pub use layer::{load_state, param_count, Layer, LayerTag, Role, Sequential, StateEntry};
pub use loss::{softmax, softmax_cross_entropy, CrossEntropy};
pub use norm::BatchNorm2d;
pub use pool::{Pool2d, PoolKind, TimeMaxPool};
pub use scalar::{matmul, MatRef, Scalar};
pub use tensor::{Param, Tensor};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("backward called on {0} without a preceding forward")]
    NoForwardCache(String),
    #[error("batchnorm needs at least 2 samples in train mode, got {0}")]
    BatchTooSmall(usize),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error("checkpoint: bad magic")]
    BadMagic,
    #[error("checkpoint: unsupported version {0}")]
    UnsupportedVersion(u16),
    #[error("checkpoint: truncated")]
    Truncated,
    #[error("checkpoint: CRC mismatch")]
    ChecksumMismatch,
    #[error("checkpoint does not fit model: {0}")]
    StateMismatch(String),
    #[error("i/o: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// He-uniform init: `U(-sqrt(6 / fan_in), sqrt(6 / fan_in))`.
pub fn he_uniform<T: Scalar>(shape: &[usize], fan_in: usize, rng: &mut impl Rng) -> Tensor<T> {
    let limit = (6.0 / fan_in.max(1) as f64).sqrt();
    let n = shape.iter().product();
    let data = (0..n).map(|_| T::lit(rng.random_range(-limit..=limit))).collect();
    Tensor::from_vec(shape, data).expect("length matches shape")
}
