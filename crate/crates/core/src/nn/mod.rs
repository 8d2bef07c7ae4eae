//! Small feed-forward network engine: dense and 3x3 convolution layers,
//! an explicit activation tape, manual backpropagation and Adam.

mod adam;
mod gradcheck;
mod io;
mod layer;
mod network;
mod tensor;

pub use adam::AdamState;
pub use gradcheck::{grad_check, grad_check_with, CheckLoss};
pub use io::{MAGIC as RWNN_MAGIC, VERSION as RWNN_VERSION};
pub use layer::{Layer, LayerSpec, CONV_KERNEL, POOL_SIZE};
pub use network::{Backward, Gradients, Network, Tape};
pub use tensor::Tensor;

/// Mean cross-entropy of `probs` (`[batch, classes]`) against class indices.
pub fn cross_entropy(probs: &Tensor, targets: &[usize]) -> f64 {
    let classes = probs.shape()[1];
    let total: f64 = targets
        .iter()
        .enumerate()
        .map(|(n, &t)| -probs.data()[n * classes + t].max(f64::MIN_POSITIVE).ln())
        .sum();
    total / targets.len() as f64
}
