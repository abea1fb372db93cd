//! Post-hoc, example-based explanations for encoder-decoder generative
//! models.
//!
//! The workflow has three phases:
//!
//! 1. **Preparation** ([`criteria`]): every anchor image is scored by an
//!    intrinsic criterion (KL divergence of its encoded Gaussian to the
//!    prior) and an extrinsic criterion (MSE or Fréchet distance between the
//!    anchor and its reconstruction).
//! 2. **Analysis** ([`analysis`]): thresholds calibrated on the model's own
//!    samples split anchors into the HIHE / HILE / LIHE / LILE quadrants.
//! 3. **Discovery** ([`discovery`]): greedy k-dispersion or k-center picks a
//!    handful of characteristic anchors from a quadrant.
//!
//! [`validation`] reproduces the representative-training-sample study,
//! including a TracIn baseline, on top of the bundled VAE in [`model`].

pub mod analysis;
pub mod criteria;
pub mod discovery;
pub mod error;
pub mod image;
pub mod model;
pub mod numerics;
pub mod rng;
pub mod toolkit;
pub mod validation;

pub use error::{Error, Result};
pub use image::Image;
