use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde_json::{json, Value};

use pxgen::analysis::{calibrate, conception_subset, delusion_subset, CalibrationConfig, ThresholdMode, Thresholds};
use pxgen::criteria::{score_anchors, ExtrinsicKind, FeatureMap, Quadrant};
use pxgen::discovery::{select_from_group, DistanceSpace, SelectionMethod};
use pxgen::model::{read_checkpoint, sample, train, write_checkpoint, Checkpoint, GenerativeModel, TrainConfig, VaeParams};
use pxgen::toolkit::{
    checksum, json_bytes, read_idx_images, read_idx_labels, read_json, synth_dataset, write_grid, write_idx_images,
    ScoreTable,
};
use pxgen::validation::{run_study, tracin_scores, StudyConfig, ValidationReport};
use pxgen::Image;

use crate::args::*;
use crate::UsageError;

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Train(a) => train_cmd(a, seed),
        Command::Sample(a) => sample_cmd(a, seed.unwrap_or(0)),
        Command::Score(a) => score_cmd(a),
        Command::Calibrate(a) => calibrate_cmd(a, seed.unwrap_or(0)),
        Command::Classify(a) => classify_cmd(a),
        Command::Subset(a) => subset_cmd(a),
        Command::Select(a) => select_cmd(a),
        Command::Tracin(a) => tracin_cmd(a, seed.unwrap_or(0)),
        Command::Validate(a) => validate_cmd(a),
        Command::Report(a) => report_cmd(a),
    }
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn echo_json(value: &impl serde::Serialize, path: Option<&PathBuf>) -> Result<()> {
    let bytes = json_bytes(value)?;
    if let Some(p) = path {
        write(p, &bytes)?;
    }
    print!("{}", String::from_utf8(bytes)?);
    Ok(())
}

fn load_data(d: &DataArgs) -> Result<Vec<Image>> {
    let mut images = if let Some(path) = &d.images {
        let images = read_idx_images(path).with_context(|| format!("reading {}", path.display()))?;
        match (&d.labels, d.label) {
            (Some(lp), Some(label)) => {
                let labels = read_idx_labels(lp).with_context(|| format!("reading {}", lp.display()))?;
                if labels.len() != images.len() {
                    bail!("{} labels for {} images", labels.len(), images.len());
                }
                images.into_iter().zip(labels).filter(|(_, l)| *l == label).map(|(im, _)| im).collect()
            }
            (Some(_), None) => return Err(usage("--labels needs --label")),
            _ => images,
        }
    } else if !d.synth.is_empty() {
        let mut images = Vec::with_capacity(d.count * d.synth.len());
        for &class in &d.synth {
            images.extend(synth_dataset(d.count, class, d.data_seed.wrapping_add(u64::from(class)))?);
        }
        images
    } else {
        return Err(usage("no data source: pass --images or --synth"));
    };
    if let Some(limit) = d.limit {
        images.truncate(limit);
    }
    if images.is_empty() {
        bail!("data source yielded no images");
    }
    Ok(images)
}

fn describe_data(d: &DataArgs) -> Value {
    match &d.images {
        Some(p) => json!({
            "images": p.display().to_string(),
            "labels": d.labels.as_ref().map(|l| l.display().to_string()),
            "label": d.label,
            "limit": d.limit,
        }),
        None => json!({ "synth": d.synth, "count": d.count, "data_seed": d.data_seed, "limit": d.limit }),
    }
}

struct Model {
    params: VaeParams,
    checksum: String,
}

fn load_model(path: &Path) -> Result<Model> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let ckpt = pxgen::model::checkpoint_from_bytes(&bytes).with_context(|| format!("decoding {}", path.display()))?;
    Ok(Model { params: ckpt.params, checksum: checksum(&bytes) })
}

fn extrinsic_kind(a: &ExtrinsicArgs, model: &VaeParams) -> Result<ExtrinsicKind> {
    Ok(match a.extrinsic {
        ExtrinsicArg::Mse => ExtrinsicKind::Mse,
        ExtrinsicArg::Frechet => {
            let (w, h) = model.image_size();
            ExtrinsicKind::FrechetPerAnchor { feature_map: FeatureMap::avg_pool(w, h, a.window)? }
        }
    })
}

fn read_table(path: &Path, model: &Model) -> Result<ScoreTable> {
    let table = ScoreTable::read(path).with_context(|| format!("reading {}", path.display()))?;
    if table.metadata.model_checksum != model.checksum {
        bail!("{} was scored with a different model", path.display());
    }
    Ok(table)
}

fn check_anchor_count(table: &ScoreTable, anchors: &[Image]) -> Result<()> {
    if table.rows.len() != anchors.len() {
        bail!("score table has {} rows but {} anchors were loaded", table.rows.len(), anchors.len());
    }
    Ok(())
}

fn train_cmd(a: TrainArgs, seed: Option<u64>) -> Result<()> {
    let mut cfg: TrainConfig = match &a.config {
        Some(p) => read_json(p).with_context(|| format!("reading {}", p.display()))?,
        None => TrainConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(v) = a.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = a.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = a.learning_rate {
        cfg.learning_rate = v;
    }
    if let Some(v) = a.latent_dim {
        cfg.latent_dim = v;
    }
    if let Some(v) = &a.hidden {
        cfg.hidden_dims = v.clone();
    }
    if let Some(v) = a.checkpoint_interval {
        cfg.checkpoint_interval = v;
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let data = load_data(&a.data)?;
    let out = train(&data, &cfg)?;
    if let Some(dir) = &a.checkpoint_dir {
        std::fs::create_dir_all(dir)?;
        for c in &out.checkpoints {
            write_checkpoint(dir.join(format!("epoch-{:05}.ckpt", c.epoch)), c)?;
        }
    }
    let last = Checkpoint { epoch: cfg.epochs, params: out.params, learning_rate: cfg.learning_rate, seed: cfg.seed };
    write_checkpoint(&a.out, &last)?;
    if let Some(p) = &a.loss_out {
        write(p, &json_bytes(&json!({ "config": cfg, "loss": out.loss_curve }))?)?;
    }
    Ok(())
}

fn sample_cmd(a: SampleArgs, seed: u64) -> Result<()> {
    if a.n == 0 {
        return Err(usage("--n must be positive"));
    }
    let model = load_model(&a.model)?;
    let images = sample(&model.params, a.n, seed)?;
    write_idx_images(&images, &a.out)?;
    if let Some(g) = &a.grid {
        write_grid(&images, a.columns, g)?;
    }
    Ok(())
}

fn score_cmd(a: ScoreArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let anchors = load_data(&a.data)?;
    let kind = extrinsic_kind(&a.extrinsic, &model.params)?;
    let rows = score_anchors(&model.params, &anchors, &kind)?;
    let config = json!({ "anchors": describe_data(&a.data), "extrinsic": kind });
    ScoreTable::new(model.checksum, rows, config)?.write(&a.out)?;
    Ok(())
}

fn calibrate_cmd(a: CalibrateArgs, seed: u64) -> Result<()> {
    let model = load_model(&a.model)?;
    let config = CalibrationConfig {
        mode: match a.mode {
            ModeArg::AvgMax => ThresholdMode::AvgMax,
            ModeArg::Percentile => ThresholdMode::Percentile,
        },
        samples_per_iteration: a.n,
        iterations: a.iterations,
        percentile: a.p,
        seed,
    };
    config.validate().map_err(|e| usage(e.to_string()))?;
    let kind = extrinsic_kind(&a.extrinsic, &model.params)?;
    let thresholds = calibrate(&model.params, &config, &kind)?;
    write(&a.out, &json_bytes(&thresholds)?)
}

fn classify_cmd(a: ClassifyArgs) -> Result<()> {
    let mut table = ScoreTable::read(&a.table).with_context(|| format!("reading {}", a.table.display()))?;
    let thresholds: Thresholds =
        read_json(&a.thresholds).with_context(|| format!("reading {}", a.thresholds.display()))?;
    if let Some(kind) = table.metadata.config.get("extrinsic") {
        if *kind != serde_json::to_value(&thresholds.extrinsic)? {
            bail!("thresholds were calibrated for a different extrinsic criterion");
        }
    }
    let partition = table.apply_thresholds(thresholds)?;
    table.write(a.out.as_ref().unwrap_or(&a.table))?;
    let mut sizes = serde_json::Map::new();
    for (q, n) in partition.sizes() {
        sizes.insert(q.to_string(), json!(n));
    }
    echo_json(&json!({ "total": table.rows.len(), "quadrants": sizes }), a.summary.as_ref())
}

fn subset_cmd(a: SubsetArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let table = read_table(&a.table, &model)?;
    let anchors = load_data(&a.data)?;
    check_anchor_count(&table, &anchors)?;
    let indices = match a.kind {
        SubsetKind::Delusion => delusion_subset(&table.rows, a.fraction)?,
        SubsetKind::Conception => conception_subset(&table.rows, a.fraction)?,
    };
    let shown = &indices[..a.rows.unwrap_or(indices.len()).min(indices.len())];
    if shown.is_empty() {
        return Err(usage("--rows must be positive"));
    }
    let picked: Vec<Image> = shown.iter().map(|&i| anchors[i].clone()).collect();
    let recon = model.params.reconstruct_batch(&picked)?;
    let tiles: Vec<Image> = picked.into_iter().zip(recon).flat_map(|(x, r)| [x, r]).collect();
    write_grid(&tiles, 2, &a.out)?;
    let kind = match a.kind {
        SubsetKind::Delusion => "delusion",
        SubsetKind::Conception => "conception",
    };
    echo_json(&json!({ "kind": kind, "fraction": a.fraction, "indices": indices }), None)
}

fn select_cmd(a: SelectArgs) -> Result<()> {
    if a.group == Quadrant::Unset {
        return Err(usage("--group must be one of HIHE, HILE, LIHE, LILE"));
    }
    let model = load_model(&a.model)?;
    let table = read_table(&a.table, &model)?;
    let anchors = load_data(&a.data)?;
    check_anchor_count(&table, &anchors)?;
    let partition = table.partition()?;
    let group = partition.group(a.group);
    let method = match a.method {
        MethodArg::KDispersion => SelectionMethod::KDispersion,
        MethodArg::KCenter => SelectionMethod::KCenter,
        MethodArg::BruteDispersion => SelectionMethod::BruteDispersion,
        MethodArg::BruteCenter => SelectionMethod::BruteCenter,
    };
    let space = match a.space {
        SpaceArg::Pixel => DistanceSpace::Pixel,
        SpaceArg::LatentMean => DistanceSpace::LatentMean,
    };
    let result = select_from_group(&model.params, &anchors, group, a.k, method, space)?;
    let picked: Vec<Image> = result.chosen.iter().map(|&i| anchors[i].clone()).collect();
    write_grid(&picked, a.columns, &a.out)?;
    echo_json(
        &json!({ "group": a.group, "group_size": group.len(), "space": space, "selection": result }),
        a.result.as_ref(),
    )
}

fn read_checkpoint_dir(dir: &Path) -> Result<Vec<Checkpoint>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "ckpt"));
    paths.sort();
    if paths.is_empty() {
        bail!("no .ckpt files in {}", dir.display());
    }
    paths
        .iter()
        .map(|p| read_checkpoint(p).with_context(|| format!("reading {}", p.display())))
        .collect()
}

fn tracin_cmd(a: TracinArgs, seed: u64) -> Result<()> {
    let checkpoints = read_checkpoint_dir(&a.checkpoint_dir)?;
    let train_set = load_data(&a.data)?;
    let targets = match (&a.model, &a.targets) {
        (Some(m), None) => sample(&load_model(m)?.params, a.n_targets, seed)?,
        (None, Some(t)) => read_idx_images(t)?,
        _ => return Err(usage("pass exactly one of --model or --targets")),
    };
    let scores = tracin_scores(&checkpoints, &train_set, &targets)?;
    let mut csv = csv::Writer::from_writer(Vec::new());
    for s in &scores {
        csv.serialize(s)?;
    }
    write(&a.out, &csv.into_inner()?)
}

fn validate_cmd(a: ValidateArgs) -> Result<()> {
    let data = load_data(&a.data)?;
    let mut study: StudyConfig = match &a.config {
        Some(p) => read_json(p).with_context(|| format!("reading {}", p.display()))?,
        None => StudyConfig::desk_default(data[0].width(), data[0].height())?,
    };
    if let Some(v) = a.epochs {
        study.train.epochs = v;
        study.train.checkpoint_interval = study.train.checkpoint_interval.min(v);
    }
    if let Some(v) = &a.seeds {
        study.seeds = v.clone();
    }
    if let Some(v) = a.steps {
        study.steps = v;
    }
    if let Some(v) = a.gen_size {
        study.gen_size = v;
    }
    if let Some(v) = a.tracin_targets {
        study.tracin_targets = Some(v);
    }
    if a.no_tracin {
        study.tracin_targets = None;
    }
    let report = run_study(&data, &study)?;
    write(&a.out, &json_bytes(&report)?)?;
    if let Some(p) = &a.csv {
        write(p, report.to_csv().as_bytes())?;
    }
    Ok(())
}

fn report_cmd(a: ReportArgs) -> Result<()> {
    let report: ValidationReport = read_json(&a.report).with_context(|| format!("reading {}", a.report.display()))?;
    if let Some(p) = &a.csv {
        write(p, report.to_csv().as_bytes())?;
    }
    println!("{} cells, seeds {:?}, gen size {}", report.cell_count(), report.config.seeds, report.config.gen_size);
    for s in &report.seed_summaries {
        let sizes: Vec<String> = s.quadrant_sizes.iter().map(|(q, n)| format!("{q}={n}")).collect();
        println!("seed {}: {}", s.seed, sizes.join(" "));
    }
    println!("median distance to the original model per step:");
    for sc in &report.scenarios {
        let cells: Vec<String> = sc
            .steps
            .iter()
            .map(|st| match report.median_distance(sc.scenario, st.step) {
                Some(d) => format!("{d:.6}"),
                None => "-".into(),
            })
            .collect();
        println!("{:<9} {}", sc.scenario.to_string(), cells.join(" "));
    }
    Ok(())
}
