use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::SplitMix64;

/// Layer widths of the MLP VAE.
///
/// The encoder maps `input → hidden[0] → … → hidden[last] → 2·latent`; the
/// decoder mirrors it, `latent → hidden[last] → … → hidden[0] → input`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub image_width: usize,
    pub image_height: usize,
    pub hidden_dims: Vec<usize>,
    pub latent_dim: usize,
}

impl Architecture {
    pub fn new(
        image_width: usize,
        image_height: usize,
        hidden_dims: Vec<usize>,
        latent_dim: usize,
    ) -> Result<Self> {
        if image_width == 0 || image_height == 0 || latent_dim == 0 {
            return Err(invalid("image size and latent dimension must be positive"));
        }
        if hidden_dims.iter().any(|&h| h == 0) {
            return Err(invalid("hidden dimensions must be positive"));
        }
        Ok(Self {
            image_width,
            image_height,
            hidden_dims,
            latent_dim,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.image_width * self.image_height
    }

    /// `(fan_in, fan_out)` per encoder layer.
    pub fn encoder_shapes(&self) -> Vec<(usize, usize)> {
        let mut dims = vec![self.input_dim()];
        dims.extend(&self.hidden_dims);
        dims.push(2 * self.latent_dim);
        dims.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn decoder_shapes(&self) -> Vec<(usize, usize)> {
        let mut dims = vec![self.latent_dim];
        dims.extend(self.hidden_dims.iter().rev());
        dims.push(self.input_dim());
        dims.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

/// Affine layer `y = W x + b` with `W` stored as `(fan_out, fan_in)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: Array2::zeros((fan_out, fan_in)),
            bias: Array1::zeros(fan_out),
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weight.ncols()
    }

    pub fn fan_out(&self) -> usize {
        self.weight.nrows()
    }
}

/// Weights of the encoder and decoder. Gradients and optimizer moments use
/// the same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct VaeParams {
    pub arch: Architecture,
    pub encoder: Vec<Dense>,
    pub decoder: Vec<Dense>,
}

impl VaeParams {
    pub fn zeros(arch: &Architecture) -> Self {
        Self {
            encoder: arch
                .encoder_shapes()
                .into_iter()
                .map(|(i, o)| Dense::zeros(i, o))
                .collect(),
            decoder: arch
                .decoder_shapes()
                .into_iter()
                .map(|(i, o)| Dense::zeros(i, o))
                .collect(),
            arch: arch.clone(),
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(arch: &Architecture, rng: &mut SplitMix64) -> Self {
        let mut params = Self::zeros(arch);
        for layer in params.layers_mut() {
            let limit = (6.0 / (layer.fan_in() + layer.fan_out()) as f64).sqrt();
            layer.weight.mapv_inplace(|_| rng.uniform(-limit, limit));
        }
        params
    }

    pub fn layers(&self) -> impl Iterator<Item = &Dense> {
        self.encoder.iter().chain(self.decoder.iter())
    }

    pub fn layers_mut(&mut self) -> impl Iterator<Item = &mut Dense> {
        self.encoder.iter_mut().chain(self.decoder.iter_mut())
    }

    /// Layer names in serialization order, paired with weight shapes.
    pub fn layer_names(&self) -> Vec<String> {
        let enc = (0..self.encoder.len()).map(|i| format!("encoder.{i}"));
        let dec = (0..self.decoder.len()).map(|i| format!("decoder.{i}"));
        enc.chain(dec).collect()
    }

    pub fn num_params(&self) -> usize {
        self.layers().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    /// All values in declared order: per layer, weight (row-major) then bias.
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers()
            .flat_map(|l| l.weight.iter().copied().chain(l.bias.iter().copied()))
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.layers_mut()
            .flat_map(|l| l.weight.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.values().collect()
    }

    /// Inner product of the flattened parameter vectors.
    pub fn dot(&self, other: &VaeParams) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .layers()
            .zip(other.layers())
            .map(|(a, b)| {
                (&a.weight * &b.weight).sum() + a.bias.dot(&b.bias)
            })
            .sum())
    }

    /// `self += alpha * other`
    pub fn add_scaled(&mut self, other: &VaeParams, alpha: f64) -> Result<()> {
        self.check_same_shape(other)?;
        for (a, b) in self.layers_mut().zip(other.layers()) {
            a.weight.scaled_add(alpha, &b.weight);
            a.bias.scaled_add(alpha, &b.bias);
        }
        Ok(())
    }

    pub fn scale(&mut self, alpha: f64) {
        for v in self.values_mut() {
            *v *= alpha;
        }
    }

    pub fn check_same_shape(&self, other: &VaeParams) -> Result<()> {
        if self.arch != other.arch {
            return Err(invalid("parameter collections have different architectures"));
        }
        Ok(())
    }

    /// Checks that every layer matches the shapes implied by `arch`.
    pub fn validate(&self) -> Result<()> {
        let enc = self.arch.encoder_shapes();
        let dec = self.arch.decoder_shapes();
        if enc.len() != self.encoder.len() || dec.len() != self.decoder.len() {
            return Err(invalid("layer count does not match architecture"));
        }
        let expected = enc.iter().chain(dec.iter());
        for (name, (layer, &(fan_in, fan_out))) in
            self.layer_names().iter().zip(self.layers().zip(expected))
        {
            if layer.weight.dim() != (fan_out, fan_in) || layer.bias.len() != fan_out {
                return Err(invalid(format!(
                    "layer {name} has weight {:?} and bias {}, expected ({fan_out}, {fan_in})",
                    layer.weight.dim(),
                    layer.bias.len()
                )));
            }
        }
        Ok(())
    }
}
