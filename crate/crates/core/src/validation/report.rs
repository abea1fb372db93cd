use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::schedule::{build_schedules, RemovalSchedule, Scenario};
use super::tracin::tracin_scores;
use crate::analysis::{calibrate, classify, CalibrationConfig, ThresholdMode};
use crate::criteria::{
    frechet_distance, score_anchors, set_moments, ExtrinsicKind, FeatureMap,
    DEFAULT_REGULARIZER,
};
use crate::error::{invalid, Result};
use crate::image::Image;
use crate::model::{sample, train, train_subset, TrainConfig, TrainOutput};
use crate::numerics::{median, MomentPair};

/// Generated-set size used by the original study.
pub const PAPER_GEN_SIZE: usize = 3500;
/// Desk-scale default.
pub const DEFAULT_GEN_SIZE: usize = 500;
pub const DEFAULT_STEPS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    /// `seed` is replaced by each entry of `seeds`.
    pub train: TrainConfig,
    pub seeds: Vec<u64>,
    pub steps: usize,
    pub gen_size: usize,
    pub calibration: CalibrationConfig,
    pub extrinsic: ExtrinsicKind,
    /// Generated targets for TracIn; `None` skips the M_TRACIN scenario.
    pub tracin_targets: Option<usize>,
    pub feature_map: FeatureMap,
    pub regularizer: f64,
}

impl StudyConfig {
    pub fn desk_default(width: usize, height: usize) -> Result<Self> {
        Ok(Self {
            train: TrainConfig::default(),
            seeds: vec![1, 2, 3],
            steps: DEFAULT_STEPS,
            gen_size: DEFAULT_GEN_SIZE,
            calibration: CalibrationConfig {
                mode: ThresholdMode::Percentile,
                ..CalibrationConfig::default()
            },
            extrinsic: ExtrinsicKind::Mse,
            tracin_targets: Some(DEFAULT_GEN_SIZE),
            feature_map: FeatureMap::avg_pool(width, height, crate::criteria::DEFAULT_POOL_WINDOW)?,
            regularizer: DEFAULT_REGULARIZER,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub dataset_size: usize,
    pub gen_size: usize,
    pub paper_gen_size: usize,
    pub seeds: Vec<u64>,
    pub steps: usize,
    pub feature_map: FeatureMap,
    pub regularizer: f64,
    pub train: TrainConfig,
    pub calibration: Option<CalibrationConfig>,
    pub extrinsic: Option<ExtrinsicKind>,
    pub tracin_targets: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub seed: u64,
    pub removed: usize,
    pub retained: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub step: usize,
    pub seeds: Vec<CellResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: Scenario,
    pub steps: Vec<StepReport>,
}

/// What the analysis found for one seed's original model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub quadrant_sizes: BTreeMap<String, usize>,
    pub intrinsic_cutoff: f64,
    pub extrinsic_cutoff: f64,
    /// Scenario → cap on its removal count, when one applied.
    pub caps: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub config: ReportConfig,
    pub seed_summaries: Vec<SeedSummary>,
    pub scenarios: Vec<ScenarioReport>,
}

impl ValidationReport {
    pub fn scenario(&self, scenario: Scenario) -> Option<&ScenarioReport> {
        self.scenarios.iter().find(|s| s.scenario == scenario)
    }

    pub fn cell_count(&self) -> usize {
        self.scenarios
            .iter()
            .flat_map(|s| &s.steps)
            .map(|st| st.seeds.len())
            .sum()
    }

    /// Median over seeds of the distance at a 1-based step.
    pub fn median_distance(&self, scenario: Scenario, step: usize) -> Option<f64> {
        let st = self.scenario(scenario)?.steps.iter().find(|s| s.step == step)?;
        median(&st.seeds.iter().map(|c| c.distance).collect::<Vec<_>>())
    }

    pub fn final_step(&self) -> usize {
        self.config.steps
    }

    /// One row per (scenario, step, seed) cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("scenario,step,seed,removed,retained,distance\n");
        for s in &self.scenarios {
            for st in &s.steps {
                for c in &st.seeds {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{:e}",
                        s.scenario, st.step, c.seed, c.removed, c.retained, c.distance
                    );
                }
            }
        }
        out
    }
}

fn generated_moments(
    out: &TrainOutput,
    gen_size: usize,
    seed: u64,
    fm: &FeatureMap,
) -> Result<MomentPair> {
    let images = sample(&out.params, gen_size, seed)?;
    set_moments(&images, fm)
}

struct CellRunner<'a> {
    dataset: &'a [Image],
    gen_size: usize,
    feature_map: &'a FeatureMap,
    regularizer: f64,
    cache: HashMap<(Vec<usize>, u64), f64>,
}

impl CellRunner<'_> {
    fn distance(
        &mut self,
        config: &TrainConfig,
        original: &MomentPair,
        retained: &[usize],
    ) -> Result<f64> {
        let key = (retained.to_vec(), config.seed);
        if let Some(&d) = self.cache.get(&key) {
            return Ok(d);
        }
        let out = train_subset(self.dataset, retained, config)?;
        let moments = generated_moments(&out, self.gen_size, config.seed, self.feature_map)?;
        let d = frechet_distance(original, &moments, self.regularizer)?;
        self.cache.insert(key, d);
        Ok(d)
    }

    /// Evaluates every schedule step for one seed and appends the cells.
    fn run_seed(
        &mut self,
        config: &TrainConfig,
        original: &MomentPair,
        schedules: &[RemovalSchedule],
        into: &mut BTreeMap<Scenario, BTreeMap<usize, Vec<CellResult>>>,
    ) -> Result<()> {
        for sched in schedules {
            for st in &sched.steps {
                let distance = self.distance(config, original, &st.retained)?;
                into.entry(sched.scenario)
                    .or_default()
                    .entry(st.step)
                    .or_default()
                    .push(CellResult {
                        seed: config.seed,
                        removed: st.removed,
                        retained: st.retained.len(),
                        distance,
                    });
            }
        }
        Ok(())
    }
}

fn assemble(cells: BTreeMap<Scenario, BTreeMap<usize, Vec<CellResult>>>) -> Vec<ScenarioReport> {
    cells
        .into_iter()
        .map(|(scenario, steps)| ScenarioReport {
            scenario,
            steps: steps
                .into_iter()
                .map(|(step, seeds)| StepReport { step, seeds })
                .collect(),
        })
        .collect()
}

fn check_common(dataset: &[Image], seeds: &[u64], gen_size: usize) -> Result<()> {
    if dataset.is_empty() {
        return Err(invalid("validation dataset is empty"));
    }
    if seeds.is_empty() {
        return Err(invalid("validation needs at least one seed"));
    }
    if gen_size < 2 {
        return Err(invalid("generation size must be at least 2"));
    }
    Ok(())
}

/// Retrains on every retained set of fixed `schedules` once per seed and
/// compares generated sets with the full-data model of the same seed.
pub fn run_validation(
    dataset: &[Image],
    config: &TrainConfig,
    schedules: &[RemovalSchedule],
    seeds: &[u64],
    gen_size: usize,
    feature_map: &FeatureMap,
    regularizer: f64,
) -> Result<ValidationReport> {
    check_common(dataset, seeds, gen_size)?;
    let mut runner = CellRunner {
        dataset,
        gen_size,
        feature_map,
        regularizer,
        cache: HashMap::new(),
    };
    let mut cells = BTreeMap::new();
    for &seed in seeds {
        let cfg = TrainConfig { seed, ..config.clone() };
        let original = train(dataset, &cfg)?;
        let moments = generated_moments(&original, gen_size, seed, feature_map)?;
        runner.run_seed(&cfg, &moments, schedules, &mut cells)?;
    }
    let steps = schedules.iter().map(|s| s.steps.len()).max().unwrap_or(0);
    Ok(ValidationReport {
        config: ReportConfig {
            dataset_size: dataset.len(),
            gen_size,
            paper_gen_size: PAPER_GEN_SIZE,
            seeds: seeds.to_vec(),
            steps,
            feature_map: feature_map.clone(),
            regularizer,
            train: config.clone(),
            calibration: None,
            extrinsic: None,
            tracin_targets: None,
        },
        seed_summaries: Vec::new(),
        scenarios: assemble(cells),
    })
}

/// The full representative-sample study, per seed: train the original
/// model, score its own training set, calibrate and classify, optionally
/// compute TracIn influence over generated targets, build the schedules and
/// retrain every cell.
pub fn run_study(dataset: &[Image], study: &StudyConfig) -> Result<ValidationReport> {
    check_common(dataset, &study.seeds, study.gen_size)?;
    let mut runner = CellRunner {
        dataset,
        gen_size: study.gen_size,
        feature_map: &study.feature_map,
        regularizer: study.regularizer,
        cache: HashMap::new(),
    };
    let mut cells = BTreeMap::new();
    let mut summaries = Vec::with_capacity(study.seeds.len());
    for &seed in &study.seeds {
        let cfg = TrainConfig { seed, ..study.train.clone() };
        let original = train(dataset, &cfg)?;
        let moments = generated_moments(&original, study.gen_size, seed, &study.feature_map)?;

        let mut scores = score_anchors(&original.params, dataset, &study.extrinsic)?;
        let calibration = CalibrationConfig { seed, ..study.calibration.clone() };
        let thresholds = calibrate(&original.params, &calibration, &study.extrinsic)?;
        let partition = classify(&mut scores, &thresholds)?;

        let influence = match study.tracin_targets {
            Some(n) => {
                let targets = sample(&original.params, n, seed)?;
                Some(tracin_scores(&original.checkpoints, dataset, &targets)?)
            }
            None => None,
        };
        let schedules = build_schedules(&partition, &scores, study.steps, seed, influence.as_deref())?;
        runner.run_seed(&cfg, &moments, &schedules, &mut cells)?;

        summaries.push(SeedSummary {
            seed,
            quadrant_sizes: partition
                .sizes()
                .iter()
                .map(|(q, n)| (q.to_string(), *n))
                .collect(),
            intrinsic_cutoff: thresholds.intrinsic_cutoff,
            extrinsic_cutoff: thresholds.extrinsic_cutoff,
            caps: schedules
                .iter()
                .filter_map(|s| s.cap.map(|c| (s.scenario.to_string(), c)))
                .collect(),
        });
    }
    Ok(ValidationReport {
        config: ReportConfig {
            dataset_size: dataset.len(),
            gen_size: study.gen_size,
            paper_gen_size: PAPER_GEN_SIZE,
            seeds: study.seeds.clone(),
            steps: study.steps,
            feature_map: study.feature_map.clone(),
            regularizer: study.regularizer,
            train: study.train.clone(),
            calibration: Some(study.calibration.clone()),
            extrinsic: Some(study.extrinsic.clone()),
            tracin_targets: study.tracin_targets,
        },
        seed_summaries: summaries,
        scenarios: assemble(cells),
    })
}

