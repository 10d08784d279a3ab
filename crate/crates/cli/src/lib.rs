//! Command-line workflow: generate or ingest a corpus, infer catalog labels,
//! synthesize whole-part books, featurize pairs, then train, evaluate, sweep
//! synthetic ratios and surface overlapping books.

pub mod commands;
pub mod config;
pub mod store;

use std::ffi::OsString;
use std::path::PathBuf;

use bookrel::eval::Condition;
use bookrel::SynthKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

pub use config::CliConfig;
pub use store::RunManifest;

#[derive(Debug, Parser)]
#[command(name = "bookrel", version, about = "Classify relationships between scanned books")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a deterministic toy corpus, its catalog and embedding table.
    GenDemoCorpus(GenDemoArgs),
    /// Index a directory of book JSON files.
    Ingest(IngestArgs),
    /// Derive ground-truth pair labels from catalog enumerations.
    InferLabels(InferLabelsArgs),
    /// Build synthetic anthologies, combined volumes, splits and overlaps.
    Synthesize(SynthesizeArgs),
    /// Compute similarity matrices and pair features for labeled pairs.
    Featurize(FeaturizeArgs),
    /// Train a classifier on the training split.
    Train(TrainArgs),
    /// Score a model on held-out pairs.
    Evaluate(EvaluateArgs),
    /// Train at several synthetic fractions and tabulate the scores.
    Sweep(SweepArgs),
    /// Rank labeled pairs by OVERLAPS confidence.
    SurfaceOverlaps(SurfaceArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Seed for every random choice the command makes.
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON configuration; flags take precedence over it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker threads for featurization.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub threads: u32,
}

#[derive(Debug, Args)]
pub struct GenDemoArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct InferLabelsArgs {
    #[arg(long)]
    pub catalog: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Corpus manifests; needed to drop oversize books and sample unrelated pairs.
    #[arg(long, value_delimiter = '+')]
    pub corpus: Vec<PathBuf>,
    #[arg(long)]
    pub diff_pairs: Option<usize>,
    #[arg(long)]
    pub whole_part_share: Option<f64>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct SynthesizeArgs {
    #[arg(long, required = true, value_delimiter = '+')]
    pub corpus: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub kinds: Vec<SynthKind>,
    /// Recipes for each listed kind; without it the configured plan is used.
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    #[arg(long, required = true, value_delimiter = '+')]
    pub corpus: Vec<PathBuf>,
    /// Directories written by `synthesize`.
    #[arg(long, value_delimiter = '+')]
    pub synth: Vec<PathBuf>,
    #[arg(long, required = true, value_delimiter = '+')]
    pub pairs: Vec<PathBuf>,
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub chunk_size: Option<u64>,
    #[arg(long)]
    pub matrix_size: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
}

/// Training settings that can be given as flags.
#[derive(Debug, Clone, Args)]
pub struct TrainFlags {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, required = true, value_delimiter = '+')]
    pub features: Vec<PathBuf>,
    /// Label files selecting and relabeling featurized pairs.
    #[arg(long, value_delimiter = '+')]
    pub labels: Vec<PathBuf>,
    #[arg(long)]
    pub condition: Option<Condition>,
    #[arg(long)]
    pub synth_fraction: Option<f64>,
    #[command(flatten)]
    pub train: TrainFlags,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Split {
    /// Real pairs in the held-out split.
    Test,
    /// Every given pair.
    All,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, required = true, value_delimiter = '+')]
    pub features: Vec<PathBuf>,
    #[arg(long, value_delimiter = '+')]
    pub labels: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = Split::Test)]
    pub split: Split,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, required = true, value_delimiter = '+')]
    pub features: Vec<PathBuf>,
    #[arg(long, value_delimiter = '+')]
    pub labels: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub fractions: Vec<f64>,
    #[command(flatten)]
    pub train: TrainFlags,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct SurfaceArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, required = true, value_delimiter = '+')]
    pub features: Vec<PathBuf>,
    #[arg(long, value_delimiter = '+')]
    pub labels: Vec<PathBuf>,
    #[arg(long)]
    pub top_k: Option<usize>,
    #[arg(long, value_enum, default_value_t = Split::All)]
    pub split: Split,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Parse `argv` (program name first), run the command and return the exit
/// code. Usage errors print the usage text; other failures print one JSON
/// object describing the error to standard error.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let argv: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match commands::run(cli.command, argv) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            EXIT_FAILURE
        }
    }
}

fn error_kind(e: &anyhow::Error) -> &'static str {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<bookrel::Error>() {
            return match err {
                bookrel::Error::Io { .. } => "io",
                bookrel::Error::Config(_) => "config",
                bookrel::Error::NonFiniteLoss { .. } => "training",
                _ => "format",
            };
        }
        if cause.is::<std::io::Error>() {
            return "io";
        }
        if cause.is::<serde_json::Error>() {
            return "format";
        }
    }
    "error"
}

fn error_json(e: &anyhow::Error) -> String {
    let causes: Vec<String> = e.chain().skip(1).map(ToString::to_string).collect();
    serde_json::json!({
        "error": error_kind(e),
        "message": e.to_string(),
        "causes": causes,
    })
    .to_string()
}
