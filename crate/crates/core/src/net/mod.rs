//! The fully convolutional objectness network: architecture presets, forward
//! and backward passes, inference helpers and the weight archive.

mod archive;
mod config;
mod network;

pub use archive::{load_weights, load_weights_for, save_weights, MANIFEST_FILE};
pub use config::{LayerSpec, NetworkConfig};
pub use network::{
    objectness_from_logits, softmax_planes, ActivationMap, Gradients, Network, ObjectnessMap, Trace, Velocity,
};
