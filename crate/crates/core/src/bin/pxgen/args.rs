use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "pxgen", version, about = "Example-based explanations for VAE-style generative models")]
pub struct Cli {
    /// Global seed; falls back to PXGEN_SEED, then to the configuration
    /// file (where one is read), then 0.
    #[arg(long, global = true, env = "PXGEN_SEED")]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a VAE and write its final checkpoint.
    Train(TrainArgs),
    /// Draw images from a trained model.
    Sample(SampleArgs),
    /// Score anchors with the intrinsic and extrinsic criteria.
    Score(ScoreArgs),
    /// Estimate criterion thresholds from generated samples.
    Calibrate(CalibrateArgs),
    /// Assign quadrants to a score table.
    Classify(ClassifyArgs),
    /// Export model-delusion or model-conception subsets as grids.
    Subset(SubsetArgs),
    /// Pick k representative anchors from one quadrant.
    Select(SelectArgs),
    /// Compute TracIn influence scores of training images.
    Tracin(TracinArgs),
    /// Run the data-removal study.
    Validate(ValidateArgs),
    /// Summarize a validation report.
    Report(ReportArgs),
}

/// Where images come from: an IDX file or the synthetic generator.
#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// IDX image file.
    #[arg(long, conflicts_with = "synth")]
    pub images: Option<PathBuf>,
    /// IDX label file used with --label to keep one class.
    #[arg(long, requires = "images")]
    pub labels: Option<PathBuf>,
    #[arg(long, requires = "labels")]
    pub label: Option<u8>,
    /// Synthetic shape classes, comma separated (0 = ring, 1 = bar).
    #[arg(long, value_delimiter = ',')]
    pub synth: Vec<u32>,
    /// Synthetic images per class.
    #[arg(long, default_value_t = 1000)]
    pub count: usize,
    /// Seed of the synthetic generator; class c uses data-seed + c.
    #[arg(long, default_value_t = 1)]
    pub data_seed: u64,
    /// Keep only the first N images.
    #[arg(long)]
    pub limit: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ExtrinsicArg {
    Mse,
    Frechet,
}

#[derive(Debug, Clone, Args)]
pub struct ExtrinsicArgs {
    #[arg(long, value_enum, default_value_t = ExtrinsicArg::Mse)]
    pub extrinsic: ExtrinsicArg,
    /// Pooling window of the Fréchet feature map.
    #[arg(long, default_value_t = pxgen::criteria::DEFAULT_POOL_WINDOW)]
    pub window: usize,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// JSON training configuration; flags below override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub latent_dim: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    #[arg(long)]
    pub checkpoint_interval: Option<usize>,
    /// Final model checkpoint.
    #[arg(long)]
    pub out: PathBuf,
    /// Directory for intermediate checkpoints (needed by `tracin`).
    #[arg(long)]
    pub checkpoint_dir: Option<PathBuf>,
    /// Per-epoch mean loss as JSON.
    #[arg(long)]
    pub loss_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// IDX image file of the samples.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional PGM grid of the samples.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub columns: usize,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub extrinsic: ExtrinsicArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum ModeArg {
    AvgMax,
    Percentile,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::AvgMax)]
    pub mode: ModeArg,
    #[arg(long, default_value_t = pxgen::analysis::DEFAULT_PERCENTILE)]
    pub p: f64,
    /// Generated samples per iteration.
    #[arg(long, default_value_t = pxgen::analysis::DEFAULT_SAMPLES)]
    pub n: usize,
    #[arg(long, default_value_t = pxgen::analysis::DEFAULT_ITERATIONS)]
    pub iterations: usize,
    #[command(flatten)]
    pub extrinsic: ExtrinsicArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub table: PathBuf,
    #[arg(long)]
    pub thresholds: PathBuf,
    /// Output table; defaults to rewriting --table.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Quadrant-size summary as JSON; always echoed to stdout.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SubsetKind {
    /// Lowest-KLD anchors, ordered by ascending extrinsic distance.
    Delusion,
    /// Lowest-extrinsic anchors, ordered by ascending KLD.
    Conception,
}

#[derive(Debug, Args)]
pub struct SubsetArgs {
    #[arg(long)]
    pub table: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum)]
    pub kind: SubsetKind,
    #[arg(long, default_value_t = 0.05)]
    pub fraction: f64,
    /// Grid with one anchor and its reconstruction per row.
    #[arg(long)]
    pub out: PathBuf,
    /// Show at most this many rows in the grid.
    #[arg(long)]
    pub rows: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum MethodArg {
    KDispersion,
    KCenter,
    BruteDispersion,
    BruteCenter,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum SpaceArg {
    Pixel,
    LatentMean,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[arg(long)]
    pub table: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// HIHE, HILE, LIHE or LILE.
    #[arg(long)]
    pub group: pxgen::criteria::Quadrant,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, value_enum, default_value_t = MethodArg::KCenter)]
    pub method: MethodArg,
    #[arg(long, value_enum, default_value_t = SpaceArg::Pixel)]
    pub space: SpaceArg,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub columns: usize,
    /// Selection result as JSON; always echoed to stdout.
    #[arg(long)]
    pub result: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TracinArgs {
    /// Directory of checkpoints written by `train --checkpoint-dir`.
    #[arg(long)]
    pub checkpoint_dir: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Model that generates the targets.
    #[arg(long, conflicts_with = "targets")]
    pub model: Option<PathBuf>,
    /// IDX file of target images instead of generated ones.
    #[arg(long)]
    pub targets: Option<PathBuf>,
    #[arg(long, default_value_t = pxgen::validation::DEFAULT_GEN_SIZE)]
    pub n_targets: usize,
    /// CSV of `index,score`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// JSON study configuration; flags below override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub gen_size: Option<usize>,
    #[arg(long, conflicts_with = "no_tracin")]
    pub tracin_targets: Option<usize>,
    /// Skip the TracIn scenario.
    #[arg(long)]
    pub no_tracin: bool,
    #[arg(long)]
    pub out: PathBuf,
    /// Companion CSV with one row per cell.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}
