//! Preparation-phase criteria.
//!
//! The intrinsic criterion measures how far an anchor's encoded Gaussian sits
//! from the sampling prior N(0, I). Extrinsic criteria compare an anchor with
//! its reconstruction, either pixel-wise (MSE) or as a Fréchet distance over
//! pooled features.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{insufficient, invalid, Error, Result};
use crate::image::Image;
use crate::model::{GenerativeModel, LatentGaussian};
use crate::numerics::{mean_cov, spd_sqrt, MomentPair, PSD_TOLERANCE};

pub const DEFAULT_REGULARIZER: f64 = 1e-6;
pub const DEFAULT_POOL_WINDOW: usize = 4;

/// Affinity group of an anchor. `Unset` until thresholds are applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Quadrant {
    Hihe,
    Hile,
    Lihe,
    Lile,
    Unset,
}

impl Quadrant {
    pub const GROUPS: [Quadrant; 4] = [Quadrant::Hihe, Quadrant::Hile, Quadrant::Lihe, Quadrant::Lile];

    pub fn from_affinity(high_intrinsic: bool, high_extrinsic: bool) -> Self {
        match (high_intrinsic, high_extrinsic) {
            (true, true) => Self::Hihe,
            (true, false) => Self::Hile,
            (false, true) => Self::Lihe,
            (false, false) => Self::Lile,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Hihe => "HIHE",
            Self::Hile => "HILE",
            Self::Lihe => "LIHE",
            Self::Lile => "LILE",
            Self::Unset => "UNSET",
        }
    }
}

impl fmt::Display for Quadrant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Quadrant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "HIHE" => Ok(Self::Hihe),
            "HILE" => Ok(Self::Hile),
            "LIHE" => Ok(Self::Lihe),
            "LILE" => Ok(Self::Lile),
            "UNSET" => Ok(Self::Unset),
            _ => Err(invalid(format!("unknown quadrant {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorScore {
    pub anchor_id: usize,
    pub intrinsic: f64,
    pub extrinsic: f64,
    pub anchor_value: f64,
    pub quadrant: Quadrant,
}

impl AnchorScore {
    pub fn new(anchor_id: usize, intrinsic: f64, extrinsic: f64) -> Result<Self> {
        if !(intrinsic >= 0.0 && intrinsic.is_finite()) || !(extrinsic >= 0.0 && extrinsic.is_finite()) {
            return Err(invalid(format!(
                "anchor {anchor_id}: criteria must be finite and non-negative \
                 (intrinsic {intrinsic}, extrinsic {extrinsic})"
            )));
        }
        Ok(Self {
            anchor_id,
            intrinsic,
            extrinsic,
            anchor_value: intrinsic + extrinsic,
            quadrant: Quadrant::Unset,
        })
    }
}

/// Non-overlapping average pooling over a fixed image size; the stand-in
/// embedding for Fréchet distances between image sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureMap {
    pub name: String,
    pub width: usize,
    pub height: usize,
    pub window: usize,
}

impl FeatureMap {
    pub fn avg_pool(width: usize, height: usize, window: usize) -> Result<Self> {
        if width == 0 || height == 0 || window == 0 {
            return Err(invalid("feature map sizes must be positive"));
        }
        Ok(Self {
            name: format!("avgpool{window}"),
            width,
            height,
            window,
        })
    }

    pub fn output_dim(&self) -> usize {
        self.width.div_ceil(self.window) * self.height.div_ceil(self.window)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExtrinsicKind {
    Mse,
    /// Fréchet distance between the pooled features of an anchor and its
    /// reconstruction, each treated as a point mass.
    FrechetPerAnchor { feature_map: FeatureMap },
}

/// KL(N(mean, diag(exp(log_var))) ‖ N(0, I)) in nats.
pub fn intrinsic_kld(g: &LatentGaussian) -> Result<f64> {
    if g.mean.len() != g.log_variance.len() {
        return Err(invalid("mean and log-variance dimensions differ"));
    }
    if g.mean.iter().chain(&g.log_variance).any(|v| !v.is_finite()) {
        return Err(invalid("latent Gaussian has non-finite entries"));
    }
    let kld = -0.5
        * g.mean
            .iter()
            .zip(&g.log_variance)
            .map(|(m, lv)| 1.0 + lv - m * m - lv.exp())
            .sum::<f64>();
    if (-1e-12..0.0).contains(&kld) {
        return Ok(0.0);
    }
    if !(kld >= 0.0 && kld.is_finite()) {
        return Err(invalid(format!("KL divergence evaluated to {kld}")));
    }
    Ok(kld)
}

/// Per-pixel mean squared error.
pub fn extrinsic_mse(anchor: &Image, reconstruction: &Image) -> Result<f64> {
    check_same_size(anchor, reconstruction)?;
    let n = anchor.len() as f64;
    Ok(anchor
        .pixels()
        .iter()
        .zip(reconstruction.pixels())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n)
}

fn check_same_size(a: &Image, b: &Image) -> Result<()> {
    if (a.width(), a.height()) != (b.width(), b.height()) {
        return Err(invalid(format!(
            "image sizes differ: {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

/// Average pooling; edge blocks average only the pixels they cover.
pub fn pooled_features(x: &Image, fm: &FeatureMap) -> Result<Vec<f64>> {
    if (x.width(), x.height()) != (fm.width, fm.height) {
        return Err(invalid(format!(
            "image is {}x{}, feature map expects {}x{}",
            x.width(),
            x.height(),
            fm.width,
            fm.height
        )));
    }
    let w = fm.window;
    let mut out = Vec::with_capacity(fm.output_dim());
    for by in (0..fm.height).step_by(w) {
        for bx in (0..fm.width).step_by(w) {
            let (ye, xe) = ((by + w).min(fm.height), (bx + w).min(fm.width));
            let mut sum = 0.0;
            for row in by..ye {
                for col in bx..xe {
                    sum += x.get(row, col);
                }
            }
            out.push(sum / ((ye - by) * (xe - bx)) as f64);
        }
    }
    Ok(out)
}

/// ‖μa − μb‖² + Tr(Ca + Cb − 2 (Ca Cb)^½), with `regularizer · I` added to
/// both covariances. The cross term uses Tr((Sa Cb Sa)^½) with Sa = Ca^½,
/// which keeps every square root symmetric.
pub fn frechet_distance(a: &MomentPair, b: &MomentPair, regularizer: f64) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(invalid(format!(
            "moment dimensions differ: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let d = a.dim();
    let eye = ndarray::Array2::<f64>::eye(d);
    let ca = &a.covariance + &(&eye * regularizer);
    let cb = &b.covariance + &(&eye * regularizer);

    let mean_term: f64 = (&a.mean - &b.mean).mapv(|v| v * v).sum();
    let sa = spd_sqrt(&ca, 0.0)?;
    // Reject an indefinite `cb` up front; spd_sqrt on the product would
    // otherwise report the product's eigenvalue.
    spd_sqrt(&cb, 0.0)?;
    let inner = sa.dot(&cb).dot(&sa);
    let inner = (&inner + &inner.t()) * 0.5;
    let cross = spd_sqrt(&inner, 0.0)?.diag().sum();
    let fd = mean_term + ca.diag().sum() + cb.diag().sum() - 2.0 * cross;
    if (-PSD_TOLERANCE..0.0).contains(&fd) {
        return Ok(0.0);
    }
    if !(fd >= 0.0) {
        return Err(invalid(format!("Fréchet distance evaluated to {fd}")));
    }
    Ok(fd)
}

pub fn set_moments(images: &[Image], fm: &FeatureMap) -> Result<MomentPair> {
    if images.len() < 2 {
        return Err(insufficient(format!(
            "a Fréchet set needs at least 2 images, got {}",
            images.len()
        )));
    }
    let feats = images
        .iter()
        .map(|x| pooled_features(x, fm))
        .collect::<Result<Vec<_>>>()?;
    mean_cov(&feats)
}

/// Fréchet distance between Gaussians fitted to the pooled features of two
/// image sets.
pub fn frechet_between_sets(
    a: &[Image],
    b: &[Image],
    fm: &FeatureMap,
    regularizer: f64,
) -> Result<f64> {
    frechet_distance(&set_moments(a, fm)?, &set_moments(b, fm)?, regularizer)
}

/// Scores every anchor: encode → intrinsic KLD; decode the encoder mean →
/// extrinsic criterion against the anchor. One batched encode and one
/// batched decode over all anchors.
pub fn score_anchors<M: GenerativeModel + ?Sized>(
    model: &M,
    anchors: &[Image],
    extrinsic: &ExtrinsicKind,
) -> Result<Vec<AnchorScore>> {
    if anchors.is_empty() {
        return Err(insufficient("no anchors to score"));
    }
    let latents = model.encode_batch(anchors)?;
    let means: Vec<Vec<f64>> = latents.iter().map(|g| g.mean.clone()).collect();
    let recons = model.decode_batch(&means)?;
    anchors
        .iter()
        .zip(latents.iter().zip(&recons))
        .enumerate()
        .map(|(id, (anchor, (latent, recon)))| {
            let intrinsic = intrinsic_kld(latent)?;
            let extrinsic = extrinsic_value(anchor, recon, extrinsic)?;
            AnchorScore::new(id, intrinsic, extrinsic)
        })
        .collect()
}

pub fn extrinsic_value(anchor: &Image, recon: &Image, kind: &ExtrinsicKind) -> Result<f64> {
    match kind {
        ExtrinsicKind::Mse => extrinsic_mse(anchor, recon),
        ExtrinsicKind::FrechetPerAnchor { feature_map } => {
            check_same_size(anchor, recon)?;
            let d = feature_map.output_dim();
            let point = |x: &Image| -> Result<MomentPair> {
                MomentPair::new(
                    pooled_features(x, feature_map)?.into(),
                    ndarray::Array2::zeros((d, d)),
                )
            };
            frechet_distance(&point(anchor)?, &point(recon)?, 0.0)
        }
    }
}
