//! CLI half of the acceptance suite: every command repeated with identical
//! seed, flags, and inputs must produce byte-identical output files.

use std::path::{Path, PathBuf};
use std::process::Command;

fn run(args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_bowrnn"))
        .args(args)
        .output()
        .expect("spawn bowrnn");
    assert!(
        out.status.success(),
        "command {:?} failed: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut entries: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| {
            let e = e.unwrap();
            if e.path().is_dir() {
                return None;
            }
            Some((
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            ))
        })
        .collect();
    entries.sort();
    entries
}

/// Run the full pipeline under `root`, returning every produced artifact.
fn pipeline(root: &Path) -> Vec<(String, Vec<u8>)> {
    let ds = root.join("ds");
    let arg = |p: &PathBuf| p.display().to_string();
    let ds_s = arg(&ds);
    run(&[
        "gen-synth",
        "--classes",
        "3",
        "--dim",
        "8",
        "--codewords",
        "12",
        "--sequences",
        "36",
        "--frames",
        "24",
        "--rho",
        "0.3",
        "--seed",
        "21",
        "--out",
        &ds_s,
    ]);

    let train = ds.join("train.txt");
    let test = ds.join("test.txt");
    let stats = root.join("stats.txt");
    let cb = root.join("cb.txt");
    let model_top = root.join("model_top.txt");
    let model_scratch = root.join("model_scratch.txt");
    let hist = root.join("hist.txt");
    let preds = root.join("preds.txt");
    let metrics = root.join("metrics.txt");

    run(&[
        "train-kmeans",
        "--data",
        &arg(&train),
        "--codewords",
        "8",
        "--restarts",
        "4",
        "--seed",
        "21",
        "--subsample",
        "16",
        "--fit-zscore",
        &arg(&stats),
        "--out",
        &arg(&cb),
    ]);
    run(&[
        "train-net",
        "--data",
        &arg(&train),
        "--strategy",
        "retrain-top",
        "--codebook",
        &arg(&cb),
        "--zscore",
        &arg(&stats),
        "--epochs",
        "60",
        "--seed",
        "21",
        "--out",
        &arg(&model_top),
        "--log",
        &arg(&root.join("train_top.log")),
    ]);
    run(&[
        "train-net",
        "--data",
        &arg(&train),
        "--strategy",
        "scratch",
        "--codewords",
        "8",
        "--feature-map",
        "chi2",
        "--zscore",
        &arg(&stats),
        "--epochs",
        "40",
        "--seed",
        "21",
        "--out",
        &arg(&model_scratch),
        "--log",
        &arg(&root.join("train_scratch.log")),
    ]);
    run(&[
        "encode",
        "--data",
        &arg(&test),
        "--model",
        &arg(&model_top),
        "--assignment",
        "hard",
        "--zscore",
        &arg(&stats),
        "--out",
        &arg(&hist),
    ]);
    run(&[
        "classify",
        "--data",
        &arg(&test),
        "--model",
        &arg(&model_scratch),
        "--zscore",
        &arg(&stats),
        "--out",
        &arg(&preds),
    ]);
    run(&[
        "eval",
        "--pred",
        &arg(&preds),
        "--data",
        &arg(&test),
        "--out",
        &arg(&metrics),
    ]);

    let mut artifacts = Vec::new();
    for (name, bytes) in dir_bytes(&ds) {
        artifacts.push((format!("ds/{name}"), bytes));
    }
    for entry in dir_bytes(root) {
        if entry.0 != "ds" {
            artifacts.push(entry);
        }
    }
    artifacts
}

#[test]
fn criterion_10_cli_outputs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let first = pipeline(&dir.path().join("run1"));
    let second = pipeline(&dir.path().join("run2"));

    assert_eq!(first.len(), second.len());
    let mut files = 0usize;
    for ((name_a, bytes_a), (name_b, bytes_b)) in first.iter().zip(&second) {
        assert_eq!(name_a, name_b);
        assert_eq!(
            bytes_a, bytes_b,
            "artifact {name_a} differs between identical runs"
        );
        files += 1;
    }
    println!(
        "criterion 10 (CLI determinism): PASS — {files} artifacts byte-identical across repeated runs (gen-synth, train-kmeans, train-net x2, encode, classify, eval)"
    );
}
