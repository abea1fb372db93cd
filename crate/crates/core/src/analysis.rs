//! Analysis phase: calibrate criterion thresholds on the model's own samples,
//! split anchors into affinity quadrants and pull out the "model delusion"
//! and "aligned conception" subsets.

use serde::{Deserialize, Serialize};

use crate::criteria::{score_anchors, AnchorScore, ExtrinsicKind, Quadrant};
use crate::error::{insufficient, invalid, Result};
use crate::model::GenerativeModel;
use crate::numerics::percentile;

pub const DEFAULT_ITERATIONS: usize = 10;
pub const DEFAULT_SAMPLES: usize = 300;
pub const DEFAULT_PERCENTILE: f64 = 95.0;
pub const DEFAULT_SUBSET_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// Mean over iterations of the per-iteration maximum.
    AvgMax,
    /// Mean over iterations of the per-iteration nearest-rank percentile.
    Percentile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationConfig {
    pub mode: ThresholdMode,
    pub samples_per_iteration: usize,
    pub iterations: usize,
    pub percentile: f64,
    pub seed: u64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            mode: ThresholdMode::AvgMax,
            samples_per_iteration: DEFAULT_SAMPLES,
            iterations: DEFAULT_ITERATIONS,
            percentile: DEFAULT_PERCENTILE,
            seed: 0,
        }
    }
}

impl CalibrationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples_per_iteration < 2 {
            return Err(invalid("calibration needs at least 2 samples per iteration"));
        }
        if self.iterations < 1 {
            return Err(invalid("calibration needs at least 1 iteration"));
        }
        if self.mode == ThresholdMode::Percentile && !(self.percentile > 0.0 && self.percentile <= 100.0) {
            return Err(invalid(format!(
                "percentile must lie in (0, 100], got {}",
                self.percentile
            )));
        }
        Ok(())
    }

    fn statistic(&self, values: &[f64]) -> Result<f64> {
        match self.mode {
            ThresholdMode::AvgMax => values
                .iter()
                .copied()
                .reduce(f64::max)
                .ok_or_else(|| insufficient("empty calibration iteration")),
            ThresholdMode::Percentile => percentile(values, self.percentile),
        }
    }
}

/// Calibrated cutoffs plus the configuration that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    pub intrinsic_cutoff: f64,
    pub extrinsic_cutoff: f64,
    pub mode: ThresholdMode,
    pub percentile: f64,
    pub iterations: usize,
    pub samples_per_iteration: usize,
    pub seed: u64,
    pub extrinsic: ExtrinsicKind,
}

impl Thresholds {
    pub fn quadrant_of(&self, score: &AnchorScore) -> Quadrant {
        Quadrant::from_affinity(
            score.intrinsic <= self.intrinsic_cutoff,
            score.extrinsic <= self.extrinsic_cutoff,
        )
    }
}

/// Reduces per-iteration criterion values to cutoffs: the configured
/// statistic per iteration, then the mean over iterations.
pub fn aggregate_iterations(
    config: &CalibrationConfig,
    intrinsic: &[Vec<f64>],
    extrinsic: &[Vec<f64>],
) -> Result<(f64, f64)> {
    if intrinsic.is_empty() || intrinsic.len() != extrinsic.len() {
        return Err(invalid("need matching, non-empty per-iteration value lists"));
    }
    let mean_stat = |runs: &[Vec<f64>]| -> Result<f64> {
        let stats = runs
            .iter()
            .map(|v| config.statistic(v))
            .collect::<Result<Vec<_>>>()?;
        Ok(stats.iter().sum::<f64>() / stats.len() as f64)
    };
    Ok((mean_stat(intrinsic)?, mean_stat(extrinsic)?))
}

/// Samples `N` images per iteration (seed `seed ⊕ r`), scores them with the
/// same criteria used for anchors and aggregates per [`aggregate_iterations`].
pub fn calibrate<M: GenerativeModel + ?Sized>(
    model: &M,
    config: &CalibrationConfig,
    extrinsic: &ExtrinsicKind,
) -> Result<Thresholds> {
    config.validate()?;
    let mut intrinsic_runs = Vec::with_capacity(config.iterations);
    let mut extrinsic_runs = Vec::with_capacity(config.iterations);
    for r in 0..config.iterations {
        let samples = model.sample(config.samples_per_iteration, config.seed ^ r as u64)?;
        let scores = score_anchors(model, &samples, extrinsic)?;
        intrinsic_runs.push(scores.iter().map(|s| s.intrinsic).collect::<Vec<_>>());
        extrinsic_runs.push(scores.iter().map(|s| s.extrinsic).collect::<Vec<_>>());
    }
    let (intrinsic_cutoff, extrinsic_cutoff) =
        aggregate_iterations(config, &intrinsic_runs, &extrinsic_runs)?;
    Ok(Thresholds {
        intrinsic_cutoff,
        extrinsic_cutoff,
        mode: config.mode,
        percentile: match config.mode {
            ThresholdMode::AvgMax => 100.0,
            ThresholdMode::Percentile => config.percentile,
        },
        iterations: config.iterations,
        samples_per_iteration: config.samples_per_iteration,
        seed: config.seed,
        extrinsic: extrinsic.clone(),
    })
}

/// Positions (into the score slice) of each quadrant, ascending.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadrantPartition {
    pub hihe: Vec<usize>,
    pub hile: Vec<usize>,
    pub lihe: Vec<usize>,
    pub lile: Vec<usize>,
}

impl QuadrantPartition {
    pub fn group(&self, q: Quadrant) -> &[usize] {
        match q {
            Quadrant::Hihe => &self.hihe,
            Quadrant::Hile => &self.hile,
            Quadrant::Lihe => &self.lihe,
            Quadrant::Lile => &self.lile,
            Quadrant::Unset => &[],
        }
    }

    fn group_mut(&mut self, q: Quadrant) -> &mut Vec<usize> {
        match q {
            Quadrant::Hihe => &mut self.hihe,
            Quadrant::Hile => &mut self.hile,
            Quadrant::Lihe => &mut self.lihe,
            Quadrant::Lile => &mut self.lile,
            Quadrant::Unset => unreachable!("classified anchors always have a quadrant"),
        }
    }

    /// Rebuilds the partition from quadrant labels already stored on scores.
    pub fn from_labels(scores: &[AnchorScore]) -> Result<Self> {
        let mut p = Self::default();
        for (i, s) in scores.iter().enumerate() {
            if s.quadrant == Quadrant::Unset {
                return Err(invalid(format!("anchor at position {i} has no quadrant")));
            }
            p.group_mut(s.quadrant).push(i);
        }
        Ok(p)
    }

    pub fn sizes(&self) -> [(Quadrant, usize); 4] {
        Quadrant::GROUPS.map(|q| (q, self.group(q).len()))
    }

    /// Everything outside HIHE, ascending.
    pub fn others(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .hile
            .iter()
            .chain(&self.lihe)
            .chain(&self.lile)
            .copied()
            .collect();
        v.sort_unstable();
        v
    }
}

/// "High affinity" means at or under the cutoff. Writes each quadrant back
/// into its score.
pub fn classify(scores: &mut [AnchorScore], thresholds: &Thresholds) -> Result<QuadrantPartition> {
    if scores.is_empty() {
        return Err(insufficient("no scores to classify"));
    }
    if !thresholds.intrinsic_cutoff.is_finite() || !thresholds.extrinsic_cutoff.is_finite() {
        return Err(invalid("thresholds must be finite"));
    }
    let mut partition = QuadrantPartition::default();
    for (i, s) in scores.iter_mut().enumerate() {
        s.quadrant = thresholds.quadrant_of(s);
        partition.group_mut(s.quadrant).push(i);
    }
    Ok(partition)
}

fn subset_size(n: usize, fraction: f64) -> Result<usize> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(invalid(format!("fraction must lie in (0, 1], got {fraction}")));
    }
    // The small slack keeps products like 0.05 · 20 from rounding up past 1.
    let k = (fraction * n as f64 - 1e-9).ceil() as usize;
    Ok(k.clamp(1, n))
}

fn select_then_sort(
    scores: &[AnchorScore],
    fraction: f64,
    select_by: impl Fn(&AnchorScore) -> f64,
    sort_by: impl Fn(&AnchorScore) -> f64,
) -> Result<Vec<usize>> {
    if scores.is_empty() {
        return Err(insufficient("no scores"));
    }
    let k = subset_size(scores.len(), fraction)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| select_by(&scores[a]).total_cmp(&select_by(&scores[b])).then(a.cmp(&b)));
    order.truncate(k);
    order.sort_by(|&a, &b| sort_by(&scores[a]).total_cmp(&sort_by(&scores[b])).then(a.cmp(&b)));
    Ok(order)
}

/// The lowest-KLD `⌈fraction·n⌉` anchors, ordered by extrinsic value
/// ascending.
pub fn delusion_subset(scores: &[AnchorScore], fraction: f64) -> Result<Vec<usize>> {
    select_then_sort(scores, fraction, |s| s.intrinsic, |s| s.extrinsic)
}

/// The lowest-extrinsic `⌈fraction·n⌉` anchors, ordered by KLD ascending.
pub fn conception_subset(scores: &[AnchorScore], fraction: f64) -> Result<Vec<usize>> {
    select_then_sort(scores, fraction, |s| s.extrinsic, |s| s.intrinsic)
}
