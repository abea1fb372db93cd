#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

pub fn pxgen(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pxgen"))
        .args(args)
        .current_dir(dir)
        .env_remove("PXGEN_SEED")
        .output()
        .expect("pxgen runs")
}

pub fn ok(dir: &Path, args: &[&str]) -> Vec<u8> {
    let out = pxgen(dir, args);
    assert!(
        out.status.success(),
        "pxgen {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out.stdout
}

/// Every subcommand on a tiny synthetic setup. Returns stdout per command
/// plus the bytes of every file written, keyed by name.
pub fn pipeline(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut outputs = BTreeMap::new();
    let mut study = pxgen::validation::StudyConfig::desk_default(28, 28).unwrap();
    study.train.epochs = 10;
    study.calibration.samples_per_iteration = 100;
    study.calibration.iterations = 2;
    pxgen::toolkit::write_json(&study, dir.join("study.json")).unwrap();
    let small = ["--hidden", "24", "--latent-dim", "2"];
    let steps: Vec<(&str, Vec<&str>)> = vec![
        ("train", [
            &["--seed", "3", "train", "--synth", "0", "--count", "60", "--epochs", "3", "--checkpoint-interval", "1",
              "--out", "model.ckpt", "--checkpoint-dir", "ckpts", "--loss-out", "loss.json"][..],
            &small[..],
        ].concat()),
        ("sample", vec!["--seed", "4", "sample", "--model", "model.ckpt", "--n", "12", "--out", "samples.idx", "--grid", "samples.pgm", "--columns", "4"]),
        ("score", vec!["score", "--model", "model.ckpt", "--synth", "0,1", "--count", "20", "--data-seed", "50", "--out", "scores.csv"]),
        ("calibrate", vec!["--seed", "5", "calibrate", "--model", "model.ckpt", "--mode", "percentile", "--p", "95", "--n", "300", "--out", "thresholds.json"]),
        ("classify", vec!["classify", "--table", "scores.csv", "--thresholds", "thresholds.json", "--out", "classified.csv", "--summary", "summary.json"]),
        ("subset", vec!["subset", "--table", "classified.csv", "--model", "model.ckpt", "--synth", "0,1", "--count", "20", "--data-seed", "50", "--kind", "delusion", "--fraction", "0.1", "--out", "delusion.pgm"]),
        ("tracin", vec!["--seed", "6", "tracin", "--checkpoint-dir", "ckpts", "--synth", "0", "--count", "60", "--model", "model.ckpt", "--n-targets", "8", "--out", "influence.csv"]),
        ("validate", vec!["validate", "--config", "study.json", "--synth", "0,1", "--count", "30", "--seeds", "1,2", "--steps", "1", "--gen-size", "10", "--tracin-targets", "4", "--out", "report.json", "--csv", "report.csv"]),
        ("report", vec!["report", "--report", "report.json", "--csv", "report2.csv"]),
    ];
    for (name, args) in steps {
        outputs.insert(format!("stdout:{name}"), ok(dir, &args));
        if name == "subset" {
            let summary: serde_json::Value = serde_json::from_slice(&outputs["stdout:classify"]).unwrap();
            let (group, _) = summary["quadrants"]
                .as_object()
                .unwrap()
                .iter()
                .max_by_key(|(_, v)| v.as_u64().unwrap())
                .unwrap();
            let args = ["select", "--table", "classified.csv", "--model", "model.ckpt", "--synth", "0,1", "--count", "20",
                        "--data-seed", "50", "--group", group, "--k", "4", "--method", "k_center", "--out", "select.pgm",
                        "--result", "select.json"];
            outputs.insert("stdout:select".into(), ok(dir, &args));
        }
    }
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let key = p.strip_prefix(dir).unwrap().display().to_string();
                outputs.insert(key, std::fs::read(&p).unwrap());
            }
        }
    }
    outputs
}
