use std::path::Path;

use anyhow::{Context, Result};
use bookrel::eval::{Condition, DemoConfig, DemoPipeline};
use bookrel::synth::SynthPlan;
use bookrel::TrainConfig;
use serde::{Deserialize, Serialize};

/// Settings shared by all subcommands. Values come from the defaults, then
/// the `--config` JSON file, then command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub seed: u64,
    pub demo: DemoConfig,
    /// Recipes per synthetic kind.
    pub synth: SynthPlan,
    /// Unrelated pairs sampled by `infer-labels`.
    pub diff_pairs: usize,
    /// Sample enough unrelated pairs to hold real whole-part labels to this
    /// share of all real pairs.
    pub whole_part_share: Option<f64>,
    pub chunk_size: u64,
    pub matrix_size: usize,
    pub train: TrainConfig,
    pub condition: Condition,
    pub synth_fraction: f64,
    pub fractions: Vec<f64>,
    pub top_k: usize,
}

impl Default for CliConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            demo: DemoConfig::default(),
            synth: DemoPipeline::default().synth,
            diff_pairs: 0,
            whole_part_share: None,
            chunk_size: bookrel::embed::DEFAULT_CHUNK_SIZE,
            matrix_size: bookrel::simmat::FULL_BOOK_MATRIX_SIZE,
            train: TrainConfig::default(),
            condition: Condition::Mixed,
            synth_fraction: 1.0,
            fractions: vec![0.0, 0.05, 0.1, 0.25, 0.5, 0.75, 1.0],
            top_k: 50,
        }
    }
}

impl CliConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}
