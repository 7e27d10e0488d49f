//! Multi-modal skin-lesion-style classifier: a small vision transformer fused
//! with embedded tabular metadata through one self-attention layer, trained
//! with weighted cross entropy and weighted sampling, and inspected through
//! gradient-weighted attention relevancy maps and t-SNE projections of the
//! latent space.
//!
//! Everything is computed in 64-bit floats on the CPU with a dynamic gradient
//! tape, sized for datasets of a few hundred to a few thousand samples.

pub mod data;
pub mod error;
pub mod explain;
pub mod gradcheck;
pub mod model;
pub mod project;
pub mod rng;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
