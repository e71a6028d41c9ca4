//! Minimal feedforward networks with reverse-mode gradients.
//!
//! Everything is `f64`; speed comes from keeping the layer zoo small, not from
//! clever kernels. A [`Network`] is an ordered layer list; training callers use
//! [`Network::forward_train`] (which returns the activation cache needed by
//! [`Network::backward`]) while frozen networks use [`Network::forward_eval`].

mod checkpoint;
mod gradcheck;
mod layers;
mod loss;
mod network;
mod optim;
mod tensor;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use gradcheck::{compare_grads, grad_check, GradCheckReport};
pub use layers::{Layer, LayerSpec};
pub use loss::{bce_with_logits, BceWithLogits, LossHead, WeightedSum};
pub use network::{Cache, Network};
pub use optim::{OptHyper, OptKind, Optimizer};
pub use tensor::Tensor;
