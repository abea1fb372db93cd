use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use super::params::{Architecture, VaeParams};
use super::vae::{batch_loss_and_grad, decode_rows, images_to_rows};
use crate::error::{insufficient, invalid, Result};
use crate::image::Image;
use crate::rng::SplitMix64;

// Stream ids carved out of the run seed.
const STREAM_INIT: u64 = 0;
const STREAM_SHUFFLE: u64 = 1;
const STREAM_NOISE: u64 = 2;
const STREAM_SAMPLE: u64 = 3;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub checkpoint_interval: usize,
    pub latent_dim: usize,
    pub hidden_dims: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 64,
            learning_rate: 1e-3,
            seed: 0,
            checkpoint_interval: 10,
            latent_dim: 8,
            hidden_dims: vec![256, 64],
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.checkpoint_interval == 0 {
            return Err(invalid("epochs, batch size and checkpoint interval must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.latent_dim == 0 || self.hidden_dims.iter().any(|&h| h == 0) {
            return Err(invalid("layer widths must be positive"));
        }
        Ok(())
    }

    /// Epochs (1-based) after which a checkpoint is stored.
    pub fn checkpoint_epochs(&self) -> Vec<usize> {
        let mut epochs: Vec<usize> = (1..=self.epochs)
            .filter(|e| e % self.checkpoint_interval == 0)
            .collect();
        if epochs.last() != Some(&self.epochs) {
            epochs.push(self.epochs);
        }
        epochs
    }
}

/// Parameter snapshot taken during training.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub epoch: usize,
    pub params: VaeParams,
    pub learning_rate: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub params: VaeParams,
    pub checkpoints: Vec<Checkpoint>,
    /// Mean per-example ELBO for each epoch.
    pub loss_curve: Vec<f64>,
}

struct Adam {
    m: VaeParams,
    v: VaeParams,
    step: i32,
    lr: f64,
}

impl Adam {
    fn new(params: &VaeParams, lr: f64) -> Self {
        Self {
            m: VaeParams::zeros(&params.arch),
            v: VaeParams::zeros(&params.arch),
            step: 0,
            lr,
        }
    }

    fn update(&mut self, params: &mut VaeParams, grad: &VaeParams) {
        self.step += 1;
        let bc1 = 1.0 - ADAM_BETA1.powi(self.step);
        let bc2 = 1.0 - ADAM_BETA2.powi(self.step);
        let step_size = self.lr / bc1;
        let layers = params
            .layers_mut()
            .zip(grad.layers())
            .zip(self.m.layers_mut().zip(self.v.layers_mut()));
        for ((p, g), (m, v)) in layers {
            let pairs = [
                (p.weight.as_slice_mut(), g.weight.as_slice(), m.weight.as_slice_mut(), v.weight.as_slice_mut()),
                (p.bias.as_slice_mut(), g.bias.as_slice(), m.bias.as_slice_mut(), v.bias.as_slice_mut()),
            ];
            for (p, g, m, v) in pairs {
                let (p, g, m, v) = (p.unwrap(), g.unwrap(), m.unwrap(), v.unwrap());
                for i in 0..p.len() {
                    m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g[i];
                    v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g[i] * g[i];
                    p[i] -= step_size * m[i] / ((v[i] / bc2).sqrt() + ADAM_EPSILON);
                }
            }
        }
    }
}

/// Minibatch Adam on the mean per-example ELBO. Deterministic given the
/// config: initialization, shuffling and noise all derive from `config.seed`.
pub fn train(dataset: &[Image], config: &TrainConfig) -> Result<TrainOutput> {
    let all: Vec<usize> = (0..dataset.len()).collect();
    train_subset(dataset, &all, config)
}

/// Trains on `dataset[retained]` while replaying the batch schedule and
/// noise draws of a full-data run with the same seed: removed points are
/// masked out of their batches, so every retained point sees the same
/// batch companions (minus removals) and the same noise as in `train`.
/// Batches left empty are skipped.
pub fn train_subset(dataset: &[Image], retained: &[usize], config: &TrainConfig) -> Result<TrainOutput> {
    config.validate()?;
    let first = dataset
        .first()
        .ok_or_else(|| insufficient("training set is empty"))?;
    let n = dataset.len();
    let mut keep = vec![false; n];
    for &i in retained {
        if i >= n {
            return Err(invalid(format!("retained index {i} out of range for {n} images")));
        }
        if std::mem::replace(&mut keep[i], true) {
            return Err(invalid(format!("retained index {i} listed twice")));
        }
    }
    if retained.is_empty() {
        return Err(insufficient("no retained training points"));
    }
    let arch = Architecture::new(
        first.width(),
        first.height(),
        config.hidden_dims.clone(),
        config.latent_dim,
    )?;
    let mut params = VaeParams::init(&arch, &mut SplitMix64::stream(config.seed, STREAM_INIT));
    let data = images_to_rows(&params, dataset)?;

    let mut shuffle_rng = SplitMix64::stream(config.seed, STREAM_SHUFFLE);
    let mut noise_rng = SplitMix64::stream(config.seed, STREAM_NOISE);
    let mut adam = Adam::new(&params, config.learning_rate);
    let checkpoint_epochs = config.checkpoint_epochs();
    let mut checkpoints = Vec::with_capacity(checkpoint_epochs.len());
    let mut loss_curve = Vec::with_capacity(config.epochs);
    let l = config.latent_dim;
    let mut order: Vec<usize> = (0..n).collect();

    for epoch in 1..=config.epochs {
        shuffle_rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let noise = Array2::from_shape_fn((batch.len(), l), |_| noise_rng.normal());
            let rows: Vec<usize> = (0..batch.len()).filter(|&r| keep[batch[r]]).collect();
            if rows.is_empty() {
                continue;
            }
            let members: Vec<usize> = rows.iter().map(|&r| batch[r]).collect();
            let x = data.select(Axis(0), &members);
            let noise = noise.select(Axis(0), &rows);
            let (losses, mut grad) = batch_loss_and_grad(&params, x.view(), noise.view())?;
            epoch_loss += losses.iter().map(|e| e.total).sum::<f64>();
            grad.scale(1.0 / members.len() as f64);
            adam.update(&mut params, &grad);
        }
        loss_curve.push(epoch_loss / retained.len() as f64);
        if checkpoint_epochs.contains(&epoch) {
            checkpoints.push(Checkpoint {
                epoch,
                params: params.clone(),
                learning_rate: config.learning_rate,
                seed: config.seed,
            });
        }
    }

    Ok(TrainOutput {
        params,
        checkpoints,
        loss_curve,
    })
}

/// Draws `n` latents from N(0, I) and decodes them.
pub fn sample(params: &VaeParams, n: usize, seed: u64) -> Result<Vec<Image>> {
    if n == 0 {
        return Err(invalid("sample count must be at least 1"));
    }
    params.validate()?;
    let mut rng = SplitMix64::stream(seed, STREAM_SAMPLE);
    let z = Array2::from_shape_fn((n, params.arch.latent_dim), |_| rng.normal());
    let (w, h) = (params.arch.image_width, params.arch.image_height);
    Ok(decode_rows(params, z.view())
        .outer_iter()
        .map(|r| Image::new(w, h, r.to_vec()).expect("decoder output lies in (0,1)"))
        .collect())
}
