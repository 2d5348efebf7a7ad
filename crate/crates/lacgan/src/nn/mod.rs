//! Minimal dense-network numerical kernel: layers, activations, batch
//! normalization, dropout, Adam, losses, and exact backward passes.

pub mod activation;
pub mod adam;
pub mod batchnorm;
pub mod dense;
pub mod dropout;
pub mod gradcheck;
pub mod loss;
pub mod network;

pub use activation::Activation;
pub use adam::{adam_step, AdamState};
pub use batchnorm::{BatchNormParams, Mode};
pub use dense::DenseParams;
pub use dropout::DropoutSpec;
pub use network::{LayerSpec, NetCache, NetGrads, Network};
