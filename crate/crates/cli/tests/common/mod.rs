#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use bookrel_cli::dispatch;

/// Settings for a demo pipeline small enough to run in a few seconds.
pub const TINY_CONFIG: &str = r#"{
  "demo": {
    "n_works": 4, "vols_per_work": 3, "copies_per_volume": [1, 2],
    "combined_works": 2, "combined_span": [2, 3], "short_works": 9,
    "planted_overlaps": 2, "volume_pages": [20, 40], "short_pages": [10, 20]
  },
  "synth": {"anthology": 3, "combined": 3, "split": 3, "overlap": 3},
  "diff_pairs": 40,
  "chunk_size": 250,
  "matrix_size": 16,
  "train": {
    "epochs": 2,
    "architecture": {"conv1_filters": 2, "conv2_filters": 2, "kernel_size": 3, "pair_hidden": 4, "merge_hidden": 4}
  },
  "top_k": 5
}"#;

pub fn run(args: &[&str]) -> i32 {
    dispatch(std::iter::once("bookrel").chain(args.iter().copied()))
}

pub fn run_ok(args: &[&str]) {
    assert_eq!(run(args), 0, "command failed: {args:?}");
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

/// Run every subcommand in order under `root`, reading settings from `config`.
pub fn run_pipeline(root: &Path, config: &Path, threads: u32) {
    let p = |rel: &str| root.join(rel);
    let cfg = s(config);
    let threads = threads.to_string();
    let demo = p("demo");
    run_ok(&["gen-demo-corpus", "--out", s(&demo), "--seed", "3", "--config", cfg]);
    let manifest = demo.join("manifest.tsv");
    let heldout = demo.join("heldout-manifest.tsv");
    let labels = p("labels.tsv");
    run_ok(&[
        "infer-labels", "--catalog", s(&demo.join("catalog.tsv")), "--corpus", s(&manifest),
        "--out", s(&labels), "--seed", "3", "--config", cfg,
    ]);
    let synth = p("synth");
    run_ok(&["synthesize", "--corpus", s(&manifest), "--out", s(&synth), "--seed", "3", "--config", cfg]);
    let synth_labels = synth.join("synth-labels.tsv");
    let planted = demo.join("planted-labels.tsv");
    let features = p("features");
    let corpora = format!("{}+{}", s(&manifest), s(&heldout));
    let pairs = format!("{}+{}+{}", s(&labels), s(&synth_labels), s(&planted));
    run_ok(&[
        "featurize", "--corpus", &corpora, "--synth", s(&synth), "--pairs", &pairs,
        "--embeddings", s(&demo.join("embeddings.txt")), "--threads", &threads,
        "--out", s(&features), "--config", cfg,
    ]);
    let training = format!("{}+{}", s(&labels), s(&synth_labels));
    let model = p("model/model.bin");
    run_ok(&[
        "train", "--features", s(&features), "--labels", &training, "--seed", "3",
        "--out", s(&model), "--config", cfg,
    ]);
    run_ok(&[
        "evaluate", "--model", s(&model), "--features", s(&features), "--labels", s(&labels),
        "--out", s(&p("eval")), "--config", cfg,
    ]);
    run_ok(&[
        "sweep", "--features", s(&features), "--labels", &training, "--fractions", "0,1",
        "--seed", "7", "--out", s(&p("sweep")), "--config", cfg,
    ]);
    let ranked = format!("{}+{}", s(&labels), s(&planted));
    run_ok(&[
        "surface-overlaps", "--model", s(&model), "--features", s(&features), "--labels", &ranked,
        "--out", s(&p("overlaps.tsv")), "--config", cfg,
    ]);
}

pub fn is_run_manifest(path: &Path) -> bool {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
    name == "run-manifest.json" || name.ends_with(".run.json")
}

/// Every file under `root` keyed by its relative path, run manifests excluded.
pub fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).expect("readable dir") {
            let path = entry.expect("dir entry").path();
            if path.is_dir() {
                stack.push(path);
            } else if !is_run_manifest(&path) {
                let rel = path.strip_prefix(root).expect("under root").to_path_buf();
                out.insert(rel, fs::read(&path).expect("readable file"));
            }
        }
    }
    out
}

/// Relative paths whose contents differ between two trees, plus files present in one only.
pub fn tree_differences(a: &Path, b: &Path) -> Vec<PathBuf> {
    let (ta, tb) = (tree(a), tree(b));
    let mut diff: Vec<PathBuf> = ta
        .iter()
        .filter(|(k, v)| tb.get(*k) != Some(*v))
        .map(|(k, _)| k.clone())
        .collect();
    diff.extend(tb.keys().filter(|k| !ta.contains_key(*k)).cloned());
    diff
}
