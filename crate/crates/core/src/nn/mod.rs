//! Differentiable building blocks: tensors, the layer kernels, the network
//! container, cross-entropy, Adam, and finite-difference gradient checks.

pub mod adam;
pub mod gradcheck;
pub mod init;
pub mod layers;
pub mod loss;
pub mod network;
pub mod rng;
pub mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{grad_check, GradCheckReport};
pub use init::glorot_init;
pub use layers::{LayerParams, ParamKind};
pub use network::{Gradients, Layer, Network, Trace};
pub use rng::Rng;
pub use tensor::{Real, Tensor};
