//! The black-box model interface and the bundled MLP VAE.

mod checkpoint;
mod params;
mod train;
mod vae;

pub use checkpoint::{
    checkpoint_from_bytes, checkpoint_to_bytes, read_checkpoint, write_checkpoint,
    CHECKPOINT_MAGIC,
};
pub use params::{Architecture, Dense, VaeParams};
pub use train::{sample, train, train_subset, Checkpoint, TrainConfig, TrainOutput};
pub use vae::{
    decode, decode_batch, elbo_loss, encode, encode_batch, gradient, reconstruct_batch,
    reparameterize, ElboLoss, LatentGaussian, PROB_CLAMP,
};

use crate::error::Result;
use crate::image::Image;

/// What the explanation phases need from a generative model: an encoder to a
/// diagonal Gaussian, a decoder, and prior sampling. Nothing about training.
pub trait GenerativeModel {
    fn image_size(&self) -> (usize, usize);

    fn latent_dim(&self) -> usize;

    fn encode(&self, x: &Image) -> Result<LatentGaussian>;

    fn decode(&self, z: &[f64]) -> Result<Image>;

    fn sample(&self, n: usize, seed: u64) -> Result<Vec<Image>>;

    fn encode_batch(&self, xs: &[Image]) -> Result<Vec<LatentGaussian>> {
        xs.iter().map(|x| self.encode(x)).collect()
    }

    fn decode_batch(&self, zs: &[Vec<f64>]) -> Result<Vec<Image>> {
        zs.iter().map(|z| self.decode(z)).collect()
    }

    /// Decodes the encoder mean of each input.
    fn reconstruct_batch(&self, xs: &[Image]) -> Result<Vec<Image>> {
        let means: Vec<Vec<f64>> = self.encode_batch(xs)?.into_iter().map(|g| g.mean).collect();
        self.decode_batch(&means)
    }
}

impl GenerativeModel for VaeParams {
    fn image_size(&self) -> (usize, usize) {
        (self.arch.image_width, self.arch.image_height)
    }

    fn latent_dim(&self) -> usize {
        self.arch.latent_dim
    }

    fn encode(&self, x: &Image) -> Result<LatentGaussian> {
        encode(self, x)
    }

    fn decode(&self, z: &[f64]) -> Result<Image> {
        decode(self, z)
    }

    fn sample(&self, n: usize, seed: u64) -> Result<Vec<Image>> {
        sample(self, n, seed)
    }

    fn encode_batch(&self, xs: &[Image]) -> Result<Vec<LatentGaussian>> {
        encode_batch(self, xs)
    }

    fn decode_batch(&self, zs: &[Vec<f64>]) -> Result<Vec<Image>> {
        decode_batch(self, zs)
    }

    fn reconstruct_batch(&self, xs: &[Image]) -> Result<Vec<Image>> {
        reconstruct_batch(self, xs)
    }
}
