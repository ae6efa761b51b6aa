//! Minimal neural-network engine: dense and convolution layers with skip
//! connections, MSE loss, Adam, complexity counts and weight files.

pub mod adam;
pub mod complexity;
mod kernels;
pub mod loss;
pub mod network;
pub mod tensor;
pub mod weights;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use complexity::{count_macs, count_params};
pub use loss::mse_loss;
pub use network::{init_params, Architecture, Cache, Gradients, LayerKind, LayerSpec, ModelParams, Network, Source};
pub use tensor::{Real, Tensor};
pub use weights::{decode_weights, encode_weights, load_weights, save_weights};
