//! TracIn baseline: influence of a training point on a target, summed over
//! checkpoints as learning-rate-weighted inner products of loss gradients.
//! Gradients use the zero-noise ELBO so scores are deterministic.

use serde::{Deserialize, Serialize};

use crate::error::{insufficient, Result};
use crate::image::Image;
use crate::model::{gradient, Checkpoint, VaeParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfluenceScore {
    pub index: usize,
    pub score: f64,
}

fn zero_noise_gradient(params: &VaeParams, x: &Image) -> Result<VaeParams> {
    gradient(params, x, &vec![0.0; params.arch.latent_dim])
}

pub fn tracin_influence(checkpoints: &[Checkpoint], train_point: &Image, target: &Image) -> Result<f64> {
    if checkpoints.is_empty() {
        return Err(insufficient("TracIn needs at least one checkpoint"));
    }
    checkpoints.iter().try_fold(0.0, |acc, c| {
        let g_train = zero_noise_gradient(&c.params, train_point)?;
        let g_target = zero_noise_gradient(&c.params, target)?;
        Ok(acc + c.learning_rate * g_train.dot(&g_target)?)
    })
}

/// Mean TracIn influence of every training point over the target set.
///
/// Influence is linear in the target gradient, so the mean over targets is
/// computed against each checkpoint's mean target gradient instead of
/// pairing every training point with every target.
pub fn tracin_scores(
    checkpoints: &[Checkpoint],
    train_set: &[Image],
    targets: &[Image],
) -> Result<Vec<InfluenceScore>> {
    if checkpoints.is_empty() {
        return Err(insufficient("TracIn needs at least one checkpoint"));
    }
    if train_set.is_empty() || targets.is_empty() {
        return Err(insufficient("TracIn needs non-empty training and target sets"));
    }
    let mut scores = vec![0.0; train_set.len()];
    for c in checkpoints {
        let mut mean_target = VaeParams::zeros(&c.params.arch);
        for t in targets {
            mean_target.add_scaled(&zero_noise_gradient(&c.params, t)?, 1.0)?;
        }
        mean_target.scale(1.0 / targets.len() as f64);
        for (score, x) in scores.iter_mut().zip(train_set) {
            *score += c.learning_rate * zero_noise_gradient(&c.params, x)?.dot(&mean_target)?;
        }
    }
    Ok(scores
        .into_iter()
        .enumerate()
        .map(|(index, score)| InfluenceScore { index, score })
        .collect())
}
