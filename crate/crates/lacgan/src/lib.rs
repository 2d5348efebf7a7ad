//! GAN-based classifier over latent representations.
//!
//! An Extractor compresses 400-dim text features through a 50-dim
//! bottleneck; a conditional Generator fakes bottleneck features from noise
//! and a class code; a dual-head Discriminator judges real-vs-fake and
//! predicts the 4-way class. Includes the raw-space conditional-GAN and
//! extractor-only baselines, a synthetic dataset generator, and the
//! best-model-by-validation training protocol.

pub mod cli;
pub mod data;
pub mod error;
pub mod mat;
pub mod model;
pub mod nn;
pub mod train;

pub use error::{Error, Result};
pub use mat::Mat;
