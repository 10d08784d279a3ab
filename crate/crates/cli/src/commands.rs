use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use bookrel::corpus::{self, ManifestEntry};
use bookrel::eval::{self, ConfusionMatrix, Condition, ExperimentConfig, MetricsReport, Prediction};
use bookrel::{embed, enumparse, nn, synth, tsv};
use bookrel::{Book, LabeledPair, PairExample, Provenance, RelationshipLabel, SynthBook, SynthKind};
use rayon::prelude::*;

use crate::config::CliConfig;
use crate::store::{self, manifest_path, RunManifest};
use crate::{
    Command, CommonArgs, EvaluateArgs, FeaturizeArgs, GenDemoArgs, InferLabelsArgs, IngestArgs, Split, SurfaceArgs,
    SweepArgs, SynthesizeArgs, TrainArgs, TrainFlags,
};

pub fn run(command: Command, argv: Vec<String>) -> Result<()> {
    let started = Instant::now();
    let (name, outcome) = match command {
        Command::GenDemoCorpus(a) => ("gen-demo-corpus", gen_demo_corpus(a)),
        Command::Ingest(a) => ("ingest", ingest(a)),
        Command::InferLabels(a) => ("infer-labels", infer_labels(a)),
        Command::Synthesize(a) => ("synthesize", synthesize(a)),
        Command::Featurize(a) => ("featurize", featurize(a)),
        Command::Train(a) => ("train", train(a)),
        Command::Evaluate(a) => ("evaluate", evaluate(a)),
        Command::Sweep(a) => ("sweep", sweep(a)),
        Command::SurfaceOverlaps(a) => ("surface-overlaps", surface_overlaps(a)),
    };
    let done = outcome?;
    let manifest = RunManifest {
        command: name.to_string(),
        argv,
        seeds: vec![done.config.seed],
        config: done.config,
        inputs: done.inputs,
        outputs: vec![done.out.clone()],
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_secs: started.elapsed().as_secs_f64(),
    };
    manifest.write(&manifest_path(&done.out, done.out_is_dir))?;
    log::info!("{name} finished in {:.1}s", manifest.wall_time_secs);
    Ok(())
}

/// What a command did, for its run manifest.
struct Done {
    config: CliConfig,
    inputs: Vec<PathBuf>,
    out: PathBuf,
    out_is_dir: bool,
}

fn resolve(common: &CommonArgs) -> Result<CliConfig> {
    let mut config = CliConfig::load(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn apply_train_flags(config: &mut CliConfig, flags: &TrainFlags) {
    if let Some(v) = flags.epochs {
        config.train.epochs = v;
    }
    if let Some(v) = flags.batch_size {
        config.train.batch_size = v;
    }
    if let Some(v) = flags.learning_rate {
        config.train.learning_rate = v;
    }
    config.train.seed = config.seed;
}

fn thread_pool(threads: u32) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(threads as usize).build()?)
}

fn load_corpora(manifests: &[PathBuf]) -> Result<Vec<Book>> {
    let mut books = Vec::new();
    for m in manifests {
        books.extend(corpus::load_corpus(m)?);
    }
    Ok(books)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    tsv::write(path, text)?;
    Ok(())
}

fn gen_demo_corpus(args: GenDemoArgs) -> Result<Done> {
    let mut config = resolve(&args.common)?;
    config.demo.seed = config.seed;
    let demo = eval::generate_demo_corpus(&config.demo)?;
    let planted = demo.planted_ids();
    let (mut kept, mut held) = (Vec::new(), Vec::new());
    for book in &demo.books {
        let (dir, list) = if planted.contains(book.id.as_str()) {
            ("heldout", &mut held)
        } else {
            ("books", &mut kept)
        };
        let rel = PathBuf::from(format!("{dir}/{}.json", book.id));
        corpus::save_book(book, &args.out.join(&rel))?;
        list.push(ManifestEntry {
            id: book.id.clone(),
            path: rel,
            word_count: book.word_count(),
        });
    }
    let out = &args.out;
    write_text(&out.join("manifest.tsv"), &corpus::render_manifest(&kept))?;
    write_text(&out.join("heldout-manifest.tsv"), &corpus::render_manifest(&held))?;
    let catalog: Vec<_> = demo
        .catalog
        .iter()
        .filter(|r| !planted.contains(r.book_id.as_str()))
        .cloned()
        .collect();
    write_text(&out.join("catalog.tsv"), &enumparse::render_catalog(&catalog))?;
    write_text(&out.join("embeddings.txt"), &demo.embeddings.render())?;
    let planted_pairs: Vec<LabeledPair> = demo
        .planted_overlaps
        .iter()
        .map(|(a, b)| LabeledPair::new(a, b, RelationshipLabel::Different, Provenance::Real))
        .collect();
    write_text(&out.join("planted-labels.tsv"), &tsv::render_labels(&planted_pairs, false))?;
    log::info!("wrote {} books and {} held-out anthologies", kept.len(), held.len());
    Ok(Done {
        config,
        inputs: Vec::new(),
        out: args.out,
        out_is_dir: true,
    })
}

fn ingest(args: IngestArgs) -> Result<Done> {
    let config = resolve(&args.common)?;
    let files = corpus::book_files(&args.input)?;
    if files.is_empty() {
        bail!("no book files (*.json) in {}", args.input.display());
    }
    let base = args.out.parent().unwrap_or(Path::new(""));
    let mut seen = HashSet::new();
    let mut entries = Vec::with_capacity(files.len());
    for f in &files {
        let book = corpus::load_book(f)?;
        if !seen.insert(book.id.clone()) {
            bail!("duplicate book id {} in {}", book.id, f.display());
        }
        let path = match f.strip_prefix(base) {
            Ok(rel) if !base.as_os_str().is_empty() => rel.to_path_buf(),
            _ => std::path::absolute(f)?,
        };
        entries.push(ManifestEntry {
            id: book.id.clone(),
            path,
            word_count: book.word_count(),
        });
    }
    write_text(&args.out, &corpus::render_manifest(&entries))?;
    log::info!("indexed {} books", entries.len());
    Ok(Done {
        config,
        inputs: vec![args.input],
        out: args.out,
        out_is_dir: false,
    })
}

fn infer_labels(args: InferLabelsArgs) -> Result<Done> {
    let mut config = resolve(&args.common)?;
    if let Some(n) = args.diff_pairs {
        config.diff_pairs = n;
    }
    if args.whole_part_share.is_some() {
        config.whole_part_share = args.whole_part_share;
    }
    let rows = enumparse::read_catalog(&args.catalog)?;
    let labels = if args.corpus.is_empty() {
        if config.diff_pairs > 0 || config.whole_part_share.is_some() {
            bail!("sampling unrelated pairs needs --corpus");
        }
        eval::catalog_labels(&rows)
    } else {
        let books = eval::filter_oversize(load_corpora(&args.corpus)?, eval::MAX_TRAINING_WORDS);
        let ids: HashSet<&str> = books.iter().map(|b| b.id.as_str()).collect();
        let rows: Vec<_> = rows.into_iter().filter(|r| ids.contains(r.book_id.as_str())).collect();
        let labeled = eval::catalog_labels(&rows);
        let whole_part = labeled.iter().filter(|p| p.label.is_whole_part()).count();
        let diff = config.whole_part_share.map_or(config.diff_pairs, |share| {
            config
                .diff_pairs
                .max(eval::diff_pairs_for_share(labeled.len(), whole_part, share))
        });
        eval::real_labels(&books, &rows, diff, config.seed)
    };
    write_text(&args.out, &tsv::render_labels(&labels, false))?;
    log::info!("{} labeled pairs", labels.len());
    let mut inputs = vec![args.catalog];
    inputs.extend(args.corpus);
    Ok(Done {
        config,
        inputs,
        out: args.out,
        out_is_dir: false,
    })
}

const ALL_KINDS: [SynthKind; 4] = [SynthKind::Anthology, SynthKind::Combined, SynthKind::Split, SynthKind::OverlapPair];

fn synthesize(args: SynthesizeArgs) -> Result<Done> {
    let mut config = resolve(&args.common)?;
    let kinds: &[SynthKind] = if args.kinds.is_empty() { &ALL_KINDS } else { &args.kinds };
    let count = |kind: SynthKind| match args.count {
        Some(n) if kinds.contains(&kind) => n,
        None if kinds.contains(&kind) => config.synth.count(kind),
        _ => 0,
    };
    config.synth = synth::SynthPlan {
        anthology: count(SynthKind::Anthology),
        combined: count(SynthKind::Combined),
        split: count(SynthKind::Split),
        overlap: count(SynthKind::OverlapPair),
    };
    let books = eval::filter_oversize(load_corpora(&args.corpus)?, eval::MAX_TRAINING_WORDS);
    let output = synth::generate(&books, &config.synth, config.seed)?;
    let mut entries = Vec::with_capacity(output.books.len());
    for (i, sb) in output.books.iter().enumerate() {
        let rel = PathBuf::from(format!("books/{i:06}.json"));
        write_text(&args.out.join(&rel), &serde_json::to_string(&sb.to_json())?)?;
        entries.push(ManifestEntry {
            id: sb.book.id.clone(),
            path: rel,
            word_count: sb.book.word_count(),
        });
    }
    write_text(&args.out.join("synth-manifest.tsv"), &corpus::render_manifest(&entries))?;
    write_text(&args.out.join("synth-labels.tsv"), &tsv::render_labels(&output.pairs, true))?;
    log::info!("{} synthetic books, {} pairs", output.books.len(), output.pairs.len());
    Ok(Done {
        config,
        inputs: args.corpus,
        out: args.out,
        out_is_dir: true,
    })
}

fn load_synth_dir(dir: &Path) -> Result<Vec<Book>> {
    corpus::book_files(&dir.join("books"))?
        .iter()
        .map(|f| {
            let text = fs::read_to_string(f).with_context(|| format!("reading {}", f.display()))?;
            let value = serde_json::from_str(&text).with_context(|| format!("parsing {}", f.display()))?;
            Ok(SynthBook::from_json(&value, f)?.book)
        })
        .collect()
}

fn featurize(args: FeaturizeArgs) -> Result<Done> {
    let mut config = resolve(&args.common)?;
    if let Some(n) = args.chunk_size {
        config.chunk_size = n;
    }
    if let Some(n) = args.matrix_size {
        config.matrix_size = n;
    }
    if config.chunk_size == 0 || config.matrix_size == 0 {
        bail!("chunk and matrix sizes must be positive");
    }
    let mut books = load_corpora(&args.corpus)?;
    for dir in &args.synth {
        books.extend(load_synth_dir(dir)?);
    }
    let mut by_id: HashMap<&str, &Book> = HashMap::with_capacity(books.len());
    for b in &books {
        if by_id.insert(b.id.as_str(), b).is_some() {
            bail!("book id {} appears twice in the inputs", b.id);
        }
    }
    let pairs = store::read_all_labels(&args.pairs)?;
    let mut needed = BTreeSet::new();
    for p in &pairs {
        for id in [&p.left_id, &p.right_id] {
            if !by_id.contains_key(id.as_str()) {
                bail!("labeled pair refers to unknown book {id}");
            }
            needed.insert(id.as_str());
        }
    }
    let table = embed::load_embeddings(&args.embeddings)?;
    let (chunk, side) = (config.chunk_size, config.matrix_size);
    let examples: Vec<PairExample> = thread_pool(args.common.threads)?.install(|| -> Result<_> {
        let features: HashMap<&str, eval::BookFeatures> = needed
            .par_iter()
            .map(|id| Ok((*id, eval::book_features(by_id[id], &table, chunk)?)))
            .collect::<Result<_>>()?;
        pairs
            .par_iter()
            .map(|p| {
                let (l, r) = (&features[p.left_id.as_str()], &features[p.right_id.as_str()]);
                Ok(eval::pair_example(p, l, r, side)?)
            })
            .collect()
    })?;
    store::write_features(&args.out, &examples)?;
    log::info!("featurized {} pairs over {} books", examples.len(), needed.len());
    let mut inputs = args.corpus;
    inputs.extend(args.synth);
    inputs.extend(args.pairs);
    inputs.push(args.embeddings);
    Ok(Done {
        config,
        inputs,
        out: args.out,
        out_is_dir: true,
    })
}

fn load_examples(features: &[PathBuf], labels: &[PathBuf]) -> Result<Vec<PairExample>> {
    let examples = store::read_all_features(features)?;
    if labels.is_empty() {
        return Ok(examples);
    }
    store::relabel(examples, &store::read_all_labels(labels)?)
}

fn select(examples: Vec<PairExample>, split: Split) -> Vec<PairExample> {
    match split {
        Split::All => examples,
        Split::Test => examples
            .into_iter()
            .filter(|e| e.provenance == Provenance::Real && eval::is_test_pair(&e.left_id, &e.right_id))
            .collect(),
    }
}

fn inputs_of(features: Vec<PathBuf>, labels: Vec<PathBuf>) -> Vec<PathBuf> {
    features.into_iter().chain(labels).collect()
}

fn train(args: TrainArgs) -> Result<Done> {
    let mut config = resolve(&args.common)?;
    apply_train_flags(&mut config, &args.train);
    if let Some(c) = args.condition {
        config.condition = c;
    }
    if let Some(f) = args.synth_fraction {
        config.synth_fraction = f;
    }
    if config.condition == Condition::NoFake {
        config.synth_fraction = 0.0;
    }
    let examples = load_examples(&args.features, &args.labels)?;
    let experiment = ExperimentConfig::new(config.condition, config.synth_fraction, config.seed, config.train.clone());
    let (train_idx, _) = eval::training_split(&examples, &experiment)?;
    let set: Vec<&PairExample> = train_idx.iter().map(|&i| &examples[i]).collect();
    log::info!("training {} on {} pairs", config.condition, set.len());
    let (model, history) = nn::train(&set, &experiment.classes, &config.train)?;
    for h in &history {
        log::info!("epoch {}: loss {:.4} accuracy {:.3}", h.epoch, h.mean_loss, h.accuracy);
    }
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    nn::save_model(&model, &args.out)?;
    Ok(Done {
        config,
        inputs: inputs_of(args.features, args.labels),
        out: args.out,
        out_is_dir: false,
    })
}

const METRICS_HEADER: [&str; 5] = ["label", "precision", "recall", "f1", "support"];

pub fn render_metrics(m: &MetricsReport) -> String {
    let f = |v: f64| format!("{v:.6}");
    let mut rows: Vec<Vec<String>> = m
        .per_class
        .iter()
        .map(|c| vec![c.label.to_string(), f(c.precision), f(c.recall), f(c.f1), c.support.to_string()])
        .collect();
    let names: Vec<&str> = m.macro_classes.iter().map(|c| c.as_str()).collect();
    rows.push(vec![
        format!("macro({})", names.join("+")),
        f(m.macro_precision),
        f(m.macro_recall),
        f(m.macro_f1),
        String::new(),
    ]);
    let total: u64 = m.per_class.iter().map(|c| c.support).sum();
    rows.push(vec!["micro".into(), f(m.accuracy), f(m.accuracy), f(m.micro_f1), total.to_string()]);
    tsv::render(&METRICS_HEADER, rows)
}

/// Rows are true labels, columns predictions.
pub fn render_confusion(c: &ConfusionMatrix) -> String {
    let mut header = vec!["truth"];
    header.extend(c.classes.iter().map(|l| l.as_str()));
    tsv::render(
        &header,
        c.classes.iter().zip(&c.counts).map(|(label, row)| {
            let mut out = vec![label.to_string()];
            out.extend(row.iter().map(u64::to_string));
            out
        }),
    )
}

pub fn render_predictions(predictions: &[Prediction], classes: &[RelationshipLabel]) -> String {
    let mut header = vec!["left_id", "right_id", "truth", "predicted"];
    let prob_names: Vec<String> = classes.iter().map(|c| format!("p_{}", c.as_str())).collect();
    header.extend(prob_names.iter().map(String::as_str));
    tsv::render(
        &header,
        predictions.iter().map(|p| {
            let mut row = vec![p.left_id.clone(), p.right_id.clone(), p.truth.to_string(), p.predicted.to_string()];
            row.extend(p.probabilities.iter().map(|v| format!("{v:.6}")));
            row
        }),
    )
}

fn evaluate(args: EvaluateArgs) -> Result<Done> {
    let config = resolve(&args.common)?;
    let model = nn::load_model(&args.model)?;
    let examples = select(load_examples(&args.features, &args.labels)?, args.split);
    if examples.is_empty() {
        bail!("no pairs to evaluate");
    }
    let (metrics, confusion, predictions) = eval::evaluate(&model, &examples, &RelationshipLabel::WHOLE_PART)?;
    let out = &args.out;
    write_text(&out.join("metrics.tsv"), &render_metrics(&metrics))?;
    write_text(&out.join("confusion.tsv"), &render_confusion(&confusion))?;
    write_text(
        &out.join("predictions.tsv"),
        &render_predictions(&predictions, &model.config.classes),
    )?;
    let summary = format!(
        "{} pairs\nwhole-part macro: precision {:.3} recall {:.3} F1 {:.3}\nmicro F1 (equals accuracy here): {:.3}\n",
        examples.len(),
        metrics.macro_precision,
        metrics.macro_recall,
        metrics.macro_f1,
        metrics.micro_f1
    );
    eprint!("{summary}");
    write_text(&out.join("summary.txt"), &summary)?;
    let mut inputs = vec![args.model];
    inputs.extend(inputs_of(args.features, args.labels));
    Ok(Done {
        config,
        inputs,
        out: args.out,
        out_is_dir: true,
    })
}

fn sweep(args: SweepArgs) -> Result<Done> {
    let mut config = resolve(&args.common)?;
    apply_train_flags(&mut config, &args.train);
    if !args.fractions.is_empty() {
        config.fractions = args.fractions.clone();
    }
    let examples = load_examples(&args.features, &args.labels)?;
    let base = ExperimentConfig::new(Condition::Mixed, 1.0, config.seed, config.train.clone());
    let reports = eval::ratio_sweep(&examples, &config.fractions, &base)?;
    let out = &args.out;
    write_text(&out.join("sweep.tsv"), &eval::render_sweep_tsv(&reports))?;
    write_text(&out.join("sweep.csv"), &eval::render_sweep_csv(&reports))?;
    write_text(&out.join("reports.tsv"), &eval::render_reports(&reports))?;
    let summary: String = reports.iter().map(eval::summarize).collect::<Vec<_>>().join("\n");
    eprint!("{summary}");
    write_text(&out.join("summary.txt"), &summary)?;
    Ok(Done {
        config,
        inputs: inputs_of(args.features, args.labels),
        out: args.out,
        out_is_dir: true,
    })
}

fn surface_overlaps(args: SurfaceArgs) -> Result<Done> {
    let mut config = resolve(&args.common)?;
    if let Some(k) = args.top_k {
        config.top_k = k;
    }
    let model = nn::load_model(&args.model)?;
    let examples = select(load_examples(&args.features, &args.labels)?, args.split);
    let rows = eval::surface_overlaps(&model, &examples, config.top_k)?;
    write_text(&args.out, &eval::render_overlaps(&rows))?;
    let mut inputs = vec![args.model];
    inputs.extend(inputs_of(args.features, args.labels));
    Ok(Done {
        config,
        inputs,
        out: args.out,
        out_is_dir: false,
    })
}
