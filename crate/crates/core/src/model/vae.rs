//! Forward and reverse passes of the MLP VAE.
//!
//! ```text
//! x → [affine → tanh]* → affine → (mean, log_var)
//! z = mean + exp(log_var / 2) ⊙ ε
//! z → [affine → tanh]* → affine → sigmoid → x̂
//! ```
//!
//! Everything is computed over row batches so the dense products go through
//! gemm; the single-example functions wrap a batch of one.

use ndarray::{s, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::params::{Dense, VaeParams};
use crate::error::{invalid, Result};
use crate::image::Image;

/// Lower clamp on decoder outputs inside the cross-entropy.
pub const PROB_CLAMP: f64 = 1e-7;

/// Per-example encoder output: a diagonal Gaussian over the latent space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentGaussian {
    pub mean: Vec<f64>,
    pub log_variance: Vec<f64>,
}

impl LatentGaussian {
    pub fn new(mean: Vec<f64>, log_variance: Vec<f64>) -> Result<Self> {
        if mean.len() != log_variance.len() {
            return Err(invalid(format!(
                "mean has dimension {} but log-variance has {}",
                mean.len(),
                log_variance.len()
            )));
        }
        Ok(Self { mean, log_variance })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElboLoss {
    pub total: f64,
    pub recon: f64,
    pub kld: f64,
}

fn affine(layer: &Dense, input: &ArrayView2<f64>) -> Array2<f64> {
    let mut out = input.dot(&layer.weight.t());
    out += &layer.bias.view().insert_axis(Axis(0));
    out
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub(crate) fn images_to_rows(params: &VaeParams, xs: &[Image]) -> Result<Array2<f64>> {
    let d = params.arch.input_dim();
    let mut rows = Array2::zeros((xs.len(), d));
    for (i, x) in xs.iter().enumerate() {
        if x.len() != d
            || x.width() != params.arch.image_width
            || x.height() != params.arch.image_height
        {
            return Err(invalid(format!(
                "image {i} is {}x{}, model expects {}x{}",
                x.width(),
                x.height(),
                params.arch.image_width,
                params.arch.image_height
            )));
        }
        rows.row_mut(i).assign(&ndarray::ArrayView1::from(x.pixels()));
    }
    Ok(rows)
}

fn rows_to_images(params: &VaeParams, rows: Array2<f64>) -> Vec<Image> {
    let (w, h) = (params.arch.image_width, params.arch.image_height);
    rows.outer_iter()
        .map(|r| Image::new(w, h, r.to_vec()).expect("decoder output lies in (0,1)"))
        .collect()
}

/// Encoder activations: `acts[0]` is the input, `acts[i]` the tanh output of
/// hidden layer `i`; `out` is the final affine output `[mean | log_var]`.
struct EncoderPass {
    acts: Vec<Array2<f64>>,
    out: Array2<f64>,
}

fn encoder_pass(params: &VaeParams, x: ArrayView2<f64>) -> EncoderPass {
    let mut acts = vec![x.to_owned()];
    let (last, hidden) = params.encoder.split_last().expect("encoder has layers");
    for layer in hidden {
        let a = affine(layer, &acts.last().unwrap().view()).mapv_into(f64::tanh);
        acts.push(a);
    }
    let out = affine(last, &acts.last().unwrap().view());
    EncoderPass { acts, out }
}

/// Decoder activations: `acts[0]` is z; `probs` the sigmoid output.
struct DecoderPass {
    acts: Vec<Array2<f64>>,
    probs: Array2<f64>,
}

fn decoder_pass(params: &VaeParams, z: ArrayView2<f64>) -> DecoderPass {
    let mut acts = vec![z.to_owned()];
    let (last, hidden) = params.decoder.split_last().expect("decoder has layers");
    for layer in hidden {
        let a = affine(layer, &acts.last().unwrap().view()).mapv_into(f64::tanh);
        acts.push(a);
    }
    let probs = affine(last, &acts.last().unwrap().view()).mapv_into(sigmoid);
    DecoderPass { acts, probs }
}

/// Encodes a batch; returns `(means, log_vars)`, one row per input.
pub(crate) fn encode_rows(params: &VaeParams, x: ArrayView2<f64>) -> (Array2<f64>, Array2<f64>) {
    let l = params.arch.latent_dim;
    let out = encoder_pass(params, x).out;
    (out.slice(s![.., ..l]).to_owned(), out.slice(s![.., l..]).to_owned())
}

pub(crate) fn decode_rows(params: &VaeParams, z: ArrayView2<f64>) -> Array2<f64> {
    decoder_pass(params, z).probs
}

pub fn encode(params: &VaeParams, x: &Image) -> Result<LatentGaussian> {
    Ok(encode_batch(params, std::slice::from_ref(x))?.remove(0))
}

pub fn encode_batch(params: &VaeParams, xs: &[Image]) -> Result<Vec<LatentGaussian>> {
    let rows = images_to_rows(params, xs)?;
    let (means, log_vars) = encode_rows(params, rows.view());
    Ok(means
        .outer_iter()
        .zip(log_vars.outer_iter())
        .map(|(m, v)| LatentGaussian {
            mean: m.to_vec(),
            log_variance: v.to_vec(),
        })
        .collect())
}

/// `z = mean + exp(log_var / 2) ⊙ noise`
pub fn reparameterize(g: &LatentGaussian, noise: &[f64]) -> Result<Vec<f64>> {
    if noise.len() != g.dim() || g.log_variance.len() != g.dim() {
        return Err(invalid(format!(
            "noise has dimension {}, latent has {}",
            noise.len(),
            g.dim()
        )));
    }
    Ok(g.mean
        .iter()
        .zip(&g.log_variance)
        .zip(noise)
        .map(|((m, lv), e)| m + (0.5 * lv).exp() * e)
        .collect())
}

pub fn decode(params: &VaeParams, z: &[f64]) -> Result<Image> {
    let l = params.arch.latent_dim;
    if z.len() != l {
        return Err(invalid(format!("latent has dimension {}, model expects {l}", z.len())));
    }
    let zrow = ndarray::ArrayView2::from_shape((1, l), z).expect("shape checked");
    Ok(rows_to_images(params, decode_rows(params, zrow)).remove(0))
}

pub fn decode_batch(params: &VaeParams, zs: &[Vec<f64>]) -> Result<Vec<Image>> {
    let l = params.arch.latent_dim;
    let mut rows = Array2::zeros((zs.len(), l));
    for (i, z) in zs.iter().enumerate() {
        if z.len() != l {
            return Err(invalid(format!("latent {i} has dimension {}, model expects {l}", z.len())));
        }
        rows.row_mut(i).assign(&ndarray::ArrayView1::from(z.as_slice()));
    }
    Ok(rows_to_images(params, decode_rows(params, rows.view())))
}

/// Deterministic reconstruction through the encoder mean.
pub fn reconstruct_batch(params: &VaeParams, xs: &[Image]) -> Result<Vec<Image>> {
    let rows = images_to_rows(params, xs)?;
    let (means, _) = encode_rows(params, rows.view());
    Ok(rows_to_images(params, decode_rows(params, means.view())))
}

pub(crate) fn gaussian_kld(
    mean: impl IntoIterator<Item = f64>,
    log_var: impl IntoIterator<Item = f64>,
) -> f64 {
    let sum: f64 = mean
        .into_iter()
        .zip(log_var)
        .map(|(m, lv)| 1.0 + lv - m * m - lv.exp())
        .sum();
    -0.5 * sum
}

fn bce(x: f64, p: f64) -> f64 {
    let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    -(x * p.ln() + (1.0 - x) * (1.0 - p).ln())
}

fn check_noise(params: &VaeParams, noise: ArrayView2<f64>, batch: usize) -> Result<()> {
    if noise.dim() != (batch, params.arch.latent_dim) {
        return Err(invalid(format!(
            "noise has shape {:?}, expected ({batch}, {})",
            noise.dim(),
            params.arch.latent_dim
        )));
    }
    Ok(())
}

fn noise_row(params: &VaeParams, noise: &[f64]) -> Result<Array2<f64>> {
    let l = params.arch.latent_dim;
    if noise.len() != l {
        return Err(invalid(format!("noise has dimension {}, model expects {l}", noise.len())));
    }
    Ok(Array2::from_shape_vec((1, l), noise.to_vec()).expect("shape checked"))
}

pub fn elbo_loss(params: &VaeParams, x: &Image, noise: &[f64]) -> Result<ElboLoss> {
    let rows = images_to_rows(params, std::slice::from_ref(x))?;
    let noise = noise_row(params, noise)?;
    Ok(batch_losses(params, rows.view(), noise.view())?.remove(0))
}

/// Per-row ELBO terms for a batch.
pub(crate) fn batch_losses(
    params: &VaeParams,
    x: ArrayView2<f64>,
    noise: ArrayView2<f64>,
) -> Result<Vec<ElboLoss>> {
    check_noise(params, noise, x.nrows())?;
    let l = params.arch.latent_dim;
    let enc = encoder_pass(params, x);
    let mean = enc.out.slice(s![.., ..l]);
    let log_var = enc.out.slice(s![.., l..]);
    let z = &mean + &(log_var.mapv(|v| (0.5 * v).exp()) * noise);
    let dec = decoder_pass(params, z.view());
    Ok(losses_from(&x, &dec.probs, &mean, &log_var))
}

fn losses_from(
    x: &ArrayView2<f64>,
    probs: &Array2<f64>,
    mean: &ArrayView2<f64>,
    log_var: &ArrayView2<f64>,
) -> Vec<ElboLoss> {
    (0..x.nrows())
        .map(|i| {
            let recon: f64 = x
                .row(i)
                .iter()
                .zip(probs.row(i))
                .map(|(&xi, &pi)| bce(xi, pi))
                .sum();
            let kld = gaussian_kld(mean.row(i).iter().copied(), log_var.row(i).iter().copied());
            ElboLoss {
                total: recon + kld,
                recon,
                kld,
            }
        })
        .collect()
}

/// Exact gradient of the ELBO total for one example and fixed noise.
pub fn gradient(params: &VaeParams, x: &Image, noise: &[f64]) -> Result<VaeParams> {
    let rows = images_to_rows(params, std::slice::from_ref(x))?;
    let noise = noise_row(params, noise)?;
    Ok(batch_loss_and_grad(params, rows.view(), noise.view())?.1)
}

/// Per-row losses and the gradient of their *sum*.
pub(crate) fn batch_loss_and_grad(
    params: &VaeParams,
    x: ArrayView2<f64>,
    noise: ArrayView2<f64>,
) -> Result<(Vec<ElboLoss>, VaeParams)> {
    check_noise(params, noise, x.nrows())?;
    let l = params.arch.latent_dim;
    let enc = encoder_pass(params, x);
    let mean = enc.out.slice(s![.., ..l]);
    let log_var = enc.out.slice(s![.., l..]);
    let std = log_var.mapv(|v| (0.5 * v).exp());
    let z = &mean + &(&std * &noise);
    let dec = decoder_pass(params, z.view());
    let losses = losses_from(&x, &dec.probs, &mean, &log_var);

    let mut grad = VaeParams::zeros(&params.arch);

    // d recon / d logit = p − x, zero where the clamp is active.
    let mut delta = Array2::zeros(dec.probs.raw_dim());
    ndarray::Zip::from(&mut delta)
        .and(&dec.probs)
        .and(&x)
        .for_each(|d, &p, &xi| {
            *d = if (PROB_CLAMP..=1.0 - PROB_CLAMP).contains(&p) {
                p - xi
            } else {
                0.0
            };
        });
    let dz = backprop_stack(&params.decoder, &mut grad.decoder, &dec.acts, delta);

    // Through the reparameterization and the KLD term.
    let mut dout = Array2::zeros(enc.out.raw_dim());
    {
        let (mut dmean, mut dlv) = dout.view_mut().split_at(Axis(1), l);
        ndarray::Zip::from(&mut dmean)
            .and(&dz)
            .and(&mean)
            .for_each(|d, &g, &m| *d = g + m);
        ndarray::Zip::from(&mut dlv)
            .and(&dz)
            .and(&std)
            .and(&noise)
            .and(&log_var)
            .for_each(|d, &g, &sd, &e, &lv| *d = g * 0.5 * sd * e + 0.5 * (lv.exp() - 1.0));
    }
    backprop_stack(&params.encoder, &mut grad.encoder, &enc.acts, dout);

    Ok((losses, grad))
}

/// Backpropagates `delta` (gradient w.r.t. the last layer's pre-activation)
/// through a stack whose hidden layers use tanh. Accumulates into `grads`
/// and returns the gradient w.r.t. the stack input.
fn backprop_stack(
    layers: &[Dense],
    grads: &mut [Dense],
    acts: &[Array2<f64>],
    mut delta: Array2<f64>,
) -> Array2<f64> {
    for i in (0..layers.len()).rev() {
        let input = &acts[i];
        grads[i].weight += &delta.t().dot(input);
        grads[i].bias += &delta.sum_axis(Axis(0));
        let mut dinput = delta.dot(&layers[i].weight);
        if i > 0 {
            // acts[i] = tanh(pre), so d tanh = 1 − acts[i]².
            ndarray::Zip::from(&mut dinput)
                .and(input)
                .for_each(|d, &a| *d *= 1.0 - a * a);
        }
        delta = dinput;
    }
    delta
}
