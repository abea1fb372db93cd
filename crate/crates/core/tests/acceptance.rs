//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (no libtest harness) so the criteria execute in
//! order and share trained models. Failures are reported but only turn into
//! a nonzero exit status when `PXGEN_ACCEPTANCE_STRICT=1`.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use ndarray::{arr1, arr2, Array1, Array2};

use pxgen::analysis::{calibrate, classify, delusion_subset, CalibrationConfig, ThresholdMode, Thresholds};
use pxgen::criteria::{
    frechet_between_sets, frechet_distance, intrinsic_kld, score_anchors, AnchorScore, ExtrinsicKind, FeatureMap,
    Quadrant,
};
use pxgen::discovery::{
    brute_force_center, brute_force_dispersion, covering_radius, dispersion_objective, k_center_greedy,
    k_dispersion_greedy,
};
use pxgen::model::{
    decode_batch, elbo_loss, encode_batch, gradient, sample, train, Architecture, LatentGaussian, TrainConfig,
    TrainOutput, VaeParams,
};
use pxgen::numerics::{frobenius, mean_cov, median, pairwise_distances, spd_sqrt, Matrix, MomentPair};
use pxgen::rng::SplitMix64;
use pxgen::toolkit::synth_dataset;
use pxgen::validation::{run_study, tracin_scores, Scenario, StudyConfig, ValidationReport};
use pxgen::Image;

const SEEDS: [u64; 3] = [1, 2, 3];

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

struct Suite {
    failed: Vec<u32>,
    total: usize,
}

impl Suite {
    fn record(&mut self, id: u32, name: &str, limit: Duration, elapsed: Duration, outcome: Outcome) {
        let in_time = elapsed < limit;
        let pass = outcome.pass && in_time;
        let timing = format!("{:.1}s of {}s", elapsed.as_secs_f64(), limit.as_secs());
        let late = if in_time { "" } else { "; over time limit" };
        println!(
            "criterion {id:>2} {name}: {} ({timing}{late}; {})",
            if pass { "PASS" } else { "FAIL" },
            outcome.detail
        );
        self.total += 1;
        if !pass {
            self.failed.push(id);
        }
    }

    fn run(&mut self, id: u32, name: &str, limit: Duration, f: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f))
            .unwrap_or_else(|e| Outcome::new(false, format!("panicked: {}", panic_message(&e))));
        self.record(id, name, limit, start.elapsed(), outcome);
    }
}

fn panic_message(e: &Box<dyn std::any::Any + Send>) -> String {
    e.downcast_ref::<String>()
        .cloned()
        .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_default()
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn random_spd(rng: &mut SplitMix64, d: usize) -> Matrix {
    let a = Array2::from_shape_fn((d, d + 2), |_| rng.normal());
    a.dot(&a.t()) / (d + 2) as f64 + Array2::<f64>::eye(d) * 1e-3
}

fn random_moments(rng: &mut SplitMix64, d: usize) -> MomentPair {
    let mean = Array1::from_shape_fn(d, |_| rng.normal() * 2.0);
    MomentPair::new(mean, random_spd(rng, d)).unwrap()
}

fn closed_form_criteria() -> Outcome {
    let mut worst = 0.0f64;
    let mut check = |got: f64, want: f64| worst = worst.max((got - want).abs());
    for d in 1..=8 {
        check(intrinsic_kld(&LatentGaussian::new(vec![0.0; d], vec![0.0; d]).unwrap()).unwrap(), 0.0);
    }
    check(intrinsic_kld(&LatentGaussian::new(vec![1.0], vec![0.0]).unwrap()).unwrap(), 0.5);
    check(
        intrinsic_kld(&LatentGaussian::new(vec![0.0], vec![1.0]).unwrap()).unwrap(),
        (std::f64::consts::E - 2.0) / 2.0,
    );
    let gauss = |m: f64, v: f64| MomentPair::new(arr1(&[m]), arr2(&[[v]])).unwrap();
    check(frechet_distance(&gauss(0.0, 1.0), &gauss(1.0, 1.0), 0.0).unwrap(), 1.0);
    check(frechet_distance(&gauss(0.0, 1.0), &gauss(0.0, 4.0), 0.0).unwrap(), 1.0);
    let mut rng = SplitMix64::new(101);
    for d in [1, 3, 8] {
        let m = random_moments(&mut rng, d);
        check(frechet_distance(&m, &m, 0.0).unwrap(), 0.0);
    }
    let examples_ok = worst <= 1e-10;

    let mut asymmetry = 0.0f64;
    let mut negatives = 0;
    for i in 0..1000 {
        let d = 1 + i % 16;
        let a = random_moments(&mut rng, d);
        let b = random_moments(&mut rng, d);
        let ab = frechet_distance(&a, &b, 0.0).unwrap();
        let ba = frechet_distance(&b, &a, 0.0).unwrap();
        asymmetry = asymmetry.max((ab - ba).abs() / ab.abs().max(1.0));
        negatives += usize::from(ab < 0.0 || ba < 0.0);
    }
    Outcome::new(
        examples_ok && asymmetry <= 1e-9 && negatives == 0,
        format!("worst example error {worst:.1e}; max asymmetry {asymmetry:.1e}; negatives {negatives}"),
    )
}

fn numerics_oracles() -> Outcome {
    let mut rng = SplitMix64::new(202);
    let mut sqrt_err = 0.0f64;
    for i in 0..100 {
        let a = random_spd(&mut rng, 1 + i % 16);
        let s = spd_sqrt(&a, 0.0).unwrap();
        sqrt_err = sqrt_err.max(frobenius(&(s.dot(&s) - &a)));
    }
    let mut cov_err = 0.0f64;
    for (n, d) in [(2, 1), (10, 4), (50, 9), (200, 16)] {
        let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.normal() * 2.0 + 0.5).collect()).collect();
        let m = mean_cov(&xs).unwrap();
        let mu: Vec<f64> = (0..d).map(|j| xs.iter().map(|x| x[j]).sum::<f64>() / n as f64).collect();
        for j in 0..d {
            cov_err = cov_err.max((m.mean[j] - mu[j]).abs());
        }
        for i in 0..d {
            for j in 0..d {
                let mut c = 0.0;
                for x in &xs {
                    c += (x[i] - mu[i]) * (x[j] - mu[j]);
                }
                cov_err = cov_err.max((m.covariance[[i, j]] - c / (n - 1) as f64).abs());
            }
        }
    }
    Outcome::new(
        sqrt_err <= 1e-6 && cov_err <= 1e-10,
        format!("sqrt multiply-back {sqrt_err:.1e}; mean/cov deviation {cov_err:.1e}"),
    )
}

fn gradient_correctness() -> Outcome {
    let mut rng = SplitMix64::new(303);
    let h = 1e-5;
    let mut worst = 0.0f64;
    let networks = 24;
    for _ in 0..networks {
        let (w, ht) = (2 + rng.below(3), 1 + rng.below(3));
        let hidden: Vec<usize> = (0..1 + rng.below(2)).map(|_| 2 + rng.below(4)).collect();
        let latent = 1 + rng.below(3);
        let arch = Architecture::new(w, ht, hidden, latent).unwrap();
        let p = VaeParams::init(&arch, &mut rng);
        let x = Image::new(w, ht, (0..w * ht).map(|_| rng.uniform(0.05, 0.95)).collect()).unwrap();
        let noise = rng.normal_vec(latent);
        let analytic = gradient(&p, &x, &noise).unwrap().flatten();
        for (k, &a) in analytic.iter().enumerate() {
            let mut plus = p.clone();
            *plus.values_mut().nth(k).unwrap() += h;
            let mut minus = p.clone();
            *minus.values_mut().nth(k).unwrap() -= h;
            let fd = (elbo_loss(&plus, &x, &noise).unwrap().total - elbo_loss(&minus, &x, &noise).unwrap().total)
                / (2.0 * h);
            worst = worst.max((a - fd).abs() / a.abs().max(fd.abs()).max(1e-8));
        }
    }
    Outcome::new(worst <= 1e-4, format!("{networks} networks; max relative error {worst:.1e}"))
}

fn selection_guarantees() -> Outcome {
    let mut rng = SplitMix64::new(404);
    let instances = 300;
    let mut violations = 0;
    let (mut disp_ratio, mut center_ratio) = (f64::INFINITY, 0.0f64);
    for _ in 0..instances {
        let n = 2 + rng.below(11);
        let k = 1 + rng.below(4.min(n));
        let dim = 1 + rng.below(4);
        let pts: Vec<Vec<f64>> = (0..n).map(|_| rng.normal_vec(dim)).collect();
        let d = pairwise_distances(&pts).unwrap();
        let gd = k_dispersion_greedy(&d, k).unwrap();
        let bd = brute_force_dispersion(&d, k).unwrap();
        let gc = k_center_greedy(&d, k).unwrap();
        let bc = brute_force_center(&d, k).unwrap();
        let g_disp = dispersion_objective(&d, &gd.chosen);
        let g_rad = covering_radius(&d, &gc.chosen);
        if g_disp < 0.5 * bd.objective - 1e-12 || g_rad > 2.0 * bc.objective + 1e-12 {
            violations += 1;
        }
        if bd.objective > 0.0 && k >= 2 {
            disp_ratio = disp_ratio.min(g_disp / bd.objective);
        }
        if bc.objective > 0.0 {
            center_ratio = center_ratio.max(g_rad / bc.objective);
        }
    }
    Outcome::new(
        violations == 0,
        format!(
            "{instances} instances; {violations} violations; worst dispersion ratio {disp_ratio:.3}; worst center ratio {center_ratio:.3}"
        ),
    )
}

fn thresholds(intrinsic: f64, extrinsic: f64) -> Thresholds {
    Thresholds {
        intrinsic_cutoff: intrinsic,
        extrinsic_cutoff: extrinsic,
        mode: ThresholdMode::Percentile,
        percentile: 95.0,
        iterations: 1,
        samples_per_iteration: 1,
        seed: 0,
        extrinsic: ExtrinsicKind::Mse,
    }
}

fn quadrant_semantics() -> Outcome {
    let mut rng = SplitMix64::new(505);
    let tables = 1000;
    let mut broken = 0;
    for _ in 0..tables {
        let n = 1 + rng.below(60);
        let mut scores: Vec<AnchorScore> = (0..n)
            .map(|i| AnchorScore::new(i, rng.uniform(0.0, 10.0), rng.uniform(0.0, 1.0)).unwrap())
            .collect();
        let (ti, te) = (rng.uniform(0.0, 10.0), rng.uniform(0.0, 1.0));
        let p = classify(&mut scores, &thresholds(ti, te)).unwrap();
        let mut seen = vec![0usize; n];
        for q in [Quadrant::Hihe, Quadrant::Hile, Quadrant::Lihe, Quadrant::Lile] {
            for &i in p.group(q) {
                seen[i] += 1;
                let want = Quadrant::from_affinity(scores[i].intrinsic <= ti, scores[i].extrinsic <= te);
                if scores[i].quadrant != q || want != q {
                    broken += 1;
                }
            }
        }
        broken += seen.iter().filter(|&&c| c != 1).count();

        let (ti2, te2) = (ti + rng.uniform(0.0, 3.0), te + rng.uniform(0.0, 0.3));
        let mut wider = scores.clone();
        let p2 = classify(&mut wider, &thresholds(ti2, te2)).unwrap();
        broken += p.group(Quadrant::Hihe).iter().filter(|i| !p2.group(Quadrant::Hihe).contains(i)).count();
        broken += p2.group(Quadrant::Lile).iter().filter(|i| !p.group(Quadrant::Lile).contains(i)).count();
    }
    Outcome::new(broken == 0, format!("{tables} tables; {broken} violations"))
}

struct DeskModels {
    train_set: Vec<Image>,
    anchors: Vec<Image>,
    models: Vec<TrainOutput>,
}

fn desk_models() -> DeskModels {
    let train_set = synth_dataset(1000, 0, 1).unwrap();
    let mut anchors = synth_dataset(200, 0, 101).unwrap();
    anchors.extend(synth_dataset(200, 1, 102).unwrap());
    let models = SEEDS
        .iter()
        .map(|&seed| train(&train_set, &TrainConfig { seed, ..TrainConfig::default() }).unwrap())
        .collect();
    DeskModels { train_set, anchors, models }
}

fn desk_reproduction(desk: &DeskModels) -> Outcome {
    let mut all = true;
    let mut parts = Vec::new();
    for (seed, out) in SEEDS.iter().zip(&desk.models) {
        let mut scores = score_anchors(&out.params, &desk.anchors, &ExtrinsicKind::Mse).unwrap();
        let cal = CalibrationConfig { seed: *seed, ..CalibrationConfig::default() };
        let th = calibrate(&out.params, &cal, &ExtrinsicKind::Mse).unwrap();
        classify(&mut scores, &th).unwrap();
        let (zero, one) = scores.split_at(200);
        let med = |s: &[AnchorScore], f: fn(&AnchorScore) -> f64| median(&s.iter().map(f).collect::<Vec<_>>()).unwrap();
        let hihe = |s: &[AnchorScore]| s.iter().filter(|a| a.quadrant == Quadrant::Hihe).count();
        let (k0, k1) = (med(zero, |a| a.intrinsic), med(one, |a| a.intrinsic));
        let (e0, e1) = (med(zero, |a| a.extrinsic), med(one, |a| a.extrinsic));
        let (h0, h1) = (hihe(zero), hihe(one));
        all &= k0 < k1 && e0 < e1 && h0 > h1;
        parts.push(format!("seed {seed}: kld {k0:.2}<{k1:.2} mse {e0:.4}<{e1:.4} hihe {h0}>{h1}"));
    }
    Outcome::new(all, parts.join("; "))
}

fn delusion_property(desk: &DeskModels) -> Outcome {
    let fm = FeatureMap::avg_pool(28, 28, pxgen::criteria::DEFAULT_POOL_WINDOW).unwrap();
    let mut holds = 0;
    let mut parts = Vec::new();
    for (seed, out) in SEEDS.iter().zip(&desk.models) {
        let scores = score_anchors(&out.params, &desk.anchors, &ExtrinsicKind::Mse).unwrap();
        // ascending extrinsic order, so the top decile is the tail
        let subset = delusion_subset(&scores, 0.05).unwrap();
        let take = subset.len().div_ceil(10).max(2).min(subset.len());
        let top: Vec<Image> = subset[subset.len() - take..].iter().map(|&i| desk.anchors[i].clone()).collect();
        let means: Vec<Vec<f64>> = encode_batch(&out.params, &top).unwrap().into_iter().map(|g| g.mean).collect();
        let recons = decode_batch(&out.params, &means).unwrap();
        let generated = sample(&out.params, 500, *seed).unwrap();
        let reg = pxgen::criteria::DEFAULT_REGULARIZER;
        let d_recon = frechet_between_sets(&recons, &generated, &fm, reg).unwrap();
        let d_anchor = frechet_between_sets(&top, &generated, &fm, reg).unwrap();
        holds += usize::from(d_recon < d_anchor);
        parts.push(format!("seed {seed}: {d_recon:.3} vs {d_anchor:.3} over {take} anchors"));
    }
    Outcome::new(holds >= 2, format!("{holds}/3 seeds; {}", parts.join("; ")))
}

fn final_medians(report: &ValidationReport) -> (usize, impl Fn(Scenario) -> f64 + '_) {
    let step = report.final_step();
    (step, move |s| report.median_distance(s, step).unwrap())
}

fn per_seed(report: &ValidationReport, s: Scenario) -> Vec<f64> {
    let step = report.final_step();
    let sc = report.scenario(s).unwrap();
    let mut cells = sc.steps.iter().find(|st| st.step == step).unwrap().seeds.clone();
    cells.sort_by_key(|c| c.seed);
    cells.iter().map(|c| c.distance).collect()
}

fn validation_trend(report: &ValidationReport) -> Outcome {
    let (step, med) = final_medians(report);
    let (h, o, r) = (med(Scenario::MHihe), med(Scenario::MOthers), med(Scenario::MRandom));
    Outcome::new(
        h < o && h <= r,
        format!(
            "step {step}: M_HIHE {h:.4}, M_OTHERS {o:.4}, M_RANDOM {r:.4}; per seed HIHE {:.4?} OTHERS {:.4?} RANDOM {:.4?}",
            per_seed(report, Scenario::MHihe),
            per_seed(report, Scenario::MOthers),
            per_seed(report, Scenario::MRandom)
        ),
    )
}

fn tracin_comparison(report: &ValidationReport) -> Outcome {
    let (step, med) = final_medians(report);
    let (h, t) = (med(Scenario::MHihe), med(Scenario::MTracin));
    let hs = per_seed(report, Scenario::MHihe);
    let ts = per_seed(report, Scenario::MTracin);
    let agreeing = hs.iter().zip(&ts).filter(|(a, b)| a <= b).count();
    let note = if h > t && agreeing == 1 { "; seeds disagree 2-1" } else { "" };
    Outcome::new(
        h <= t,
        format!("step {step}: M_HIHE {h:.4}, M_TRACIN {t:.4}; {agreeing}/3 seeds favour M_HIHE{note}"),
    )
}

fn efficiency(desk: &DeskModels) -> Outcome {
    let out = &desk.models[0];
    let start = Instant::now();
    score_anchors(&out.params, &desk.train_set, &ExtrinsicKind::Mse).unwrap();
    let scoring = start.elapsed();
    let targets = sample(&out.params, 100, SEEDS[0]).unwrap();
    let start = Instant::now();
    tracin_scores(&out.checkpoints, &desk.train_set, &targets).unwrap();
    let tracin = start.elapsed();
    let ratio = tracin.as_secs_f64() / scoring.as_secs_f64();
    Outcome::new(
        out.checkpoints.len() >= 5 && ratio >= 10.0,
        format!(
            "score_anchors {:.3}s, tracin_scores {:.2}s over {} checkpoints; speedup {ratio:.0}x (reference figure 100x)",
            scoring.as_secs_f64(),
            tracin.as_secs_f64(),
            out.checkpoints.len()
        ),
    )
}

fn cli_determinism() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = common::pipeline(a.path());
    let second = common::pipeline(b.path());
    let differing: Vec<&String> = first.iter().filter(|(k, v)| second.get(*k) != Some(v)).map(|(k, _)| k).collect();
    let same_keys = first.len() == second.len();
    Outcome::new(
        same_keys && differing.is_empty(),
        format!("{} outputs compared; differing {:?}", first.len(), differing),
    )
}

fn main() {
    let mut suite = Suite { failed: Vec::new(), total: 0 };
    suite.run(1, "closed-form criteria", secs(5), closed_form_criteria);
    suite.run(2, "numerics oracles", secs(10), numerics_oracles);
    suite.run(3, "gradient correctness", secs(30), gradient_correctness);
    suite.run(4, "selection guarantees", secs(60), selection_guarantees);
    suite.run(5, "quadrant semantics", secs(5), quadrant_semantics);

    let start = Instant::now();
    let desk = catch_unwind(desk_models);
    let training = start.elapsed();
    match &desk {
        Ok(desk) => {
            let start = Instant::now();
            let outcome = desk_reproduction(desk);
            suite.record(6, "desk-scale reproduction", secs(300), training + start.elapsed(), outcome);
            // the three models above are shared, so only the analysis is timed
            suite.run(7, "model-delusion property", secs(120), || delusion_property(desk));
        }
        Err(e) => {
            let msg = format!("training panicked: {}", panic_message(e));
            suite.record(6, "desk-scale reproduction", secs(300), training, Outcome::new(false, msg.clone()));
            suite.record(7, "model-delusion property", secs(120), Duration::ZERO, Outcome::new(false, msg));
        }
    }

    let start = Instant::now();
    let study = catch_unwind(|| {
        let data = synth_dataset(1000, 0, 1).unwrap();
        run_study(&data, &StudyConfig::desk_default(28, 28).unwrap()).unwrap()
    });
    let study_time = start.elapsed();
    match &study {
        Ok(report) => {
            suite.record(8, "validation trend", secs(900), study_time, validation_trend(report));
            suite.record(9, "TracIn comparison", secs(1200), study_time, tracin_comparison(report));
        }
        Err(e) => {
            let msg = format!("study panicked: {}", panic_message(e));
            suite.record(8, "validation trend", secs(900), study_time, Outcome::new(false, msg.clone()));
            suite.record(9, "TracIn comparison", secs(1200), study_time, Outcome::new(false, msg));
        }
    }

    match &desk {
        Ok(desk) => suite.run(10, "efficiency", secs(300), || efficiency(desk)),
        Err(_) => suite.record(10, "efficiency", secs(300), Duration::ZERO, Outcome::new(false, "no trained model")),
    }
    suite.run(11, "CLI determinism", secs(120), cli_determinism);

    println!(
        "acceptance: {}/{} criteria passed{}",
        suite.total - suite.failed.len(),
        suite.total,
        if suite.failed.is_empty() { String::new() } else { format!("; failing {:?}", suite.failed) }
    );
    let strict = std::env::var("PXGEN_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && !suite.failed.is_empty() {
        std::process::exit(1);
    }
}
