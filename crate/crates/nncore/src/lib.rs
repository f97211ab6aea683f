//! Minimal neural-network substrate: dense tensors, a fixed menu of layers
//! with hand-written backward passes, Adam, and the action distributions
//! used by the policies.
//!
//! Everything is generic over [`Scalar`] so the same code runs in `f32` for
//! training and in `f64` for finite-difference gradient checks.

pub mod dist;
pub mod error;
pub mod gradcheck;
pub mod kernels;
pub mod network;
pub mod ops;
pub mod optim;
pub mod serialize;
pub mod tensor;

pub use dist::{entropy_categorical, gaussian_logprob, log_softmax, sample_categorical, softmax};
pub use error::{NnError, Result};
pub use network::{Activations, Gradients, LayerSpec, Network};
pub use optim::{clip_global_norm, AdamConfig, AdamState};
pub use tensor::{Scalar, Tensor};
