//! On-disk formats owned by the command line: featurized pair directories and
//! run manifests.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bookrel::{tsv, LabeledPair, PairExample, PairFeatures, SimilarityMatrix};
use serde::{Deserialize, Serialize};

use crate::config::CliConfig;

pub const FEATURES_MANIFEST: &str = "features-manifest.tsv";
const FEATURES_HEADER: [&str; 6] = ["left_id", "right_id", "label", "provenance", "matrix", "pair_features"];

/// Write one matrix file per pair under `dir/matrices` and index them, with
/// the pair feature vectors, in `dir/features-manifest.tsv`.
pub fn write_features(dir: &Path, examples: &[PairExample]) -> Result<()> {
    let matrices = dir.join("matrices");
    fs::create_dir_all(&matrices).with_context(|| format!("creating {}", matrices.display()))?;
    let mut rows = Vec::with_capacity(examples.len());
    for (i, e) in examples.iter().enumerate() {
        let name = format!("matrices/{i:06}.mat");
        e.matrix.save(&dir.join(&name))?;
        let features: Vec<String> = e.features.vector.iter().map(|v| v.to_string()).collect();
        rows.push(vec![
            e.left_id.clone(),
            e.right_id.clone(),
            e.label.to_string(),
            e.provenance.to_string(),
            name,
            features.join(" "),
        ]);
    }
    tsv::write(&dir.join(FEATURES_MANIFEST), &tsv::render(&FEATURES_HEADER, rows))?;
    Ok(())
}

pub fn read_features(dir: &Path) -> Result<Vec<PairExample>> {
    let path = dir.join(FEATURES_MANIFEST);
    let table = tsv::read(&path)?;
    let mut cols = [0usize; 6];
    for (slot, name) in cols.iter_mut().zip(FEATURES_HEADER) {
        *slot = table
            .column(name)
            .with_context(|| format!("{}: missing column {name:?}", path.display()))?;
    }
    let [left, right, label, provenance, matrix, features] = cols;
    table
        .rows
        .iter()
        .map(|(line, row)| {
            let at = || format!("{}:{line}", path.display());
            let vector = row[features]
                .split_whitespace()
                .map(str::parse::<f64>)
                .collect::<Result<Vec<f64>, _>>()
                .with_context(|| format!("{}: bad pair feature value", at()))?;
            if vector.is_empty() || vector.len() % 2 != 0 {
                bail!("{}: pair features need an even, positive length", at());
            }
            let d = vector.len() / 2;
            Ok(PairExample {
                left_id: row[left].clone(),
                right_id: row[right].clone(),
                matrix: SimilarityMatrix::load(&dir.join(&row[matrix]))?,
                features: PairFeatures { vector, d },
                label: row[label].parse().with_context(at)?,
                provenance: row[provenance].parse().with_context(at)?,
            })
        })
        .collect()
}

/// All pairs from several feature directories, in argument order.
pub fn read_all_features(dirs: &[PathBuf]) -> Result<Vec<PairExample>> {
    let mut out = Vec::new();
    for dir in dirs {
        out.extend(read_features(dir)?);
    }
    Ok(out)
}

pub fn read_all_labels(paths: &[PathBuf]) -> Result<Vec<LabeledPair>> {
    let mut out = Vec::new();
    for p in paths {
        out.extend(tsv::read_labels(p)?);
    }
    Ok(out)
}

/// Keep the featurized pairs named in `labels`, in label order, taking label
/// and provenance from the label files.
pub fn relabel(examples: Vec<PairExample>, labels: &[LabeledPair]) -> Result<Vec<PairExample>> {
    let mut by_pair: HashMap<(String, String), PairExample> = examples
        .into_iter()
        .map(|e| ((e.left_id.clone(), e.right_id.clone()), e))
        .collect();
    let mut out = Vec::with_capacity(labels.len());
    for l in labels {
        let key = (l.left_id.clone(), l.right_id.clone());
        let Some(mut e) = by_pair.get(&key).cloned() else {
            bail!("pair {} / {} has a label but no features", l.left_id, l.right_id);
        };
        e.label = l.label;
        e.provenance = l.provenance;
        out.push(e);
        by_pair.remove(&key);
    }
    Ok(out)
}

/// Record of one command run, written next to its outputs. The argument
/// vector and configuration snapshot are enough to repeat the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub config: CliConfig,
    pub seeds: Vec<u64>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub tool_version: String,
    pub wall_time_secs: f64,
}

/// Manifest file name for an output: `run-manifest.json` inside an output
/// directory, `<file>.run.json` beside an output file.
pub fn manifest_path(out: &Path, out_is_dir: bool) -> PathBuf {
    if out_is_dir {
        out.join("run-manifest.json")
    } else {
        let mut name = out.file_name().unwrap_or_default().to_os_string();
        name.push(".run.json");
        out.with_file_name(name)
    }
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        tsv::write(path, &(text + "\n"))?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }
}
