use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::metrics::{compute_metrics, ConfusionMatrix, MetricsReport};
use crate::corpus::Book;
use crate::embed::{self, EmbeddingTable};
use crate::error::{Error, Result};
use crate::nn::{self, ClassifierModel, EpochStats, TrainConfig};
use crate::simmat::{self, pad_truncate};
use crate::types::{LabeledPair, PairExample, Provenance, RelationshipLabel};

/// Books longer than this are kept out of training pairs.
pub const MAX_TRAINING_WORDS: u64 = 750_000;

/// Share of real pairs held out for testing, in percent.
pub const TEST_PERCENT: u64 = 20;

/// Drop books longer than `max_words`.
pub fn filter_oversize(corpus: Vec<Book>, max_words: u64) -> Vec<Book> {
    corpus
        .into_iter()
        .filter(|b| {
            let keep = b.word_count() <= max_words;
            if !keep {
                log::info!("{} has {} words, left out of training", b.id, b.word_count());
            }
            keep
        })
        .collect()
}

/// Whether the unordered pair `{a, b}` belongs to the held-out test split.
/// Depends only on the two ids, so both directions of a pair land together
/// and every condition sees the same split.
pub fn is_test_pair(a: &str, b: &str) -> bool {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let mut h = Sha256::new();
    h.update(lo.as_bytes());
    h.update([0u8]);
    h.update(hi.as_bytes());
    let digest = h.finalize();
    let v = u64::from_be_bytes(digest[..8].try_into().expect("8 bytes"));
    v % 100 < TEST_PERCENT
}

/// Sample up to `n` unrelated pairs: books with different work keys (a book
/// without a key is its own work). Each unordered pair appears at most once,
/// in a random orientation, and pairs in `exclude` are never returned.
pub fn sample_diff_pairs(
    books: &[Book],
    n: usize,
    seed: u64,
    exclude: &HashSet<(String, String)>,
) -> Vec<LabeledPair> {
    let work = |b: &Book| b.metadata.work_key.clone().unwrap_or_else(|| b.id.clone());
    let works: Vec<String> = books.iter().map(work).collect();
    let mut out = Vec::with_capacity(n);
    if books.len() < 2 {
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen: HashSet<(usize, usize)> = HashSet::new();
    let max_attempts = 50 * n + 1000;
    for _ in 0..max_attempts {
        if out.len() == n {
            break;
        }
        let i = rng.gen_range(0..books.len());
        let j = rng.gen_range(0..books.len());
        let flip = rng.gen::<bool>();
        if works[i] == works[j] || !seen.insert((i.min(j), i.max(j))) {
            continue;
        }
        let (l, r) = if flip { (j, i) } else { (i, j) };
        let (l, r) = (&books[l].id, &books[r].id);
        if exclude.contains(&(l.clone(), r.clone())) || exclude.contains(&(r.clone(), l.clone())) {
            continue;
        }
        out.push(LabeledPair::new(l, r, RelationshipLabel::Different, Provenance::Real));
    }
    if out.len() < n {
        log::warn!("only found {} of {n} unrelated pairs", out.len());
    }
    out
}

/// Chunk vectors and their sum for one book.
#[derive(Debug, Clone, PartialEq)]
pub struct BookFeatures {
    pub chunks: Vec<Vec<f64>>,
    pub vector: Vec<f64>,
}

pub fn book_features(book: &Book, table: &EmbeddingTable, chunk_size: u64) -> Result<BookFeatures> {
    let chunks = embed::chunk_vectors(book, table, chunk_size)?;
    let vector = embed::sum_vectors(&chunks, table.dimension());
    Ok(BookFeatures {
        chunks: chunks.into_iter().map(|c| c.vector).collect(),
        vector,
    })
}

pub fn pair_example(
    pair: &LabeledPair,
    left: &BookFeatures,
    right: &BookFeatures,
    matrix_size: usize,
) -> Result<PairExample> {
    let dense = simmat::pairwise_similarity(&left.chunks, &right.chunks)?;
    Ok(PairExample {
        left_id: pair.left_id.clone(),
        right_id: pair.right_id.clone(),
        matrix: pad_truncate(&dense, matrix_size)?,
        features: simmat::pair_features(&left.vector, &right.vector)?,
        label: pair.label,
        provenance: pair.provenance,
    })
}

/// Featurizes pairs over a fixed set of books, computing each book's chunk
/// vectors once.
pub struct Featurizer<'a> {
    books: HashMap<&'a str, &'a Book>,
    table: &'a EmbeddingTable,
    chunk_size: u64,
    matrix_size: usize,
    cache: HashMap<String, Arc<BookFeatures>>,
}

impl<'a> Featurizer<'a> {
    pub fn new(
        books: impl IntoIterator<Item = &'a Book>,
        table: &'a EmbeddingTable,
        chunk_size: u64,
        matrix_size: usize,
    ) -> Result<Self> {
        if chunk_size == 0 || matrix_size == 0 {
            return Err(Error::Config("chunk and matrix sizes must be positive".into()));
        }
        Ok(Self {
            books: books.into_iter().map(|b| (b.id.as_str(), b)).collect(),
            table,
            chunk_size,
            matrix_size,
            cache: HashMap::new(),
        })
    }

    pub fn book(&mut self, id: &str) -> Result<Arc<BookFeatures>> {
        if let Some(f) = self.cache.get(id) {
            return Ok(Arc::clone(f));
        }
        let book = self
            .books
            .get(id)
            .ok_or_else(|| Error::Config(format!("pair refers to unknown book {id}")))?;
        let f = Arc::new(book_features(book, self.table, self.chunk_size)?);
        self.cache.insert(id.to_string(), Arc::clone(&f));
        Ok(f)
    }

    pub fn featurize(&mut self, pair: &LabeledPair) -> Result<PairExample> {
        let left = self.book(&pair.left_id)?;
        let right = self.book(&pair.right_id)?;
        pair_example(pair, &left, &right, self.matrix_size)
    }

    pub fn featurize_all(&mut self, pairs: &[LabeledPair]) -> Result<Vec<PairExample>> {
        pairs.iter().map(|p| self.featurize(p)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    /// Real labels only.
    NoFake,
    /// Real labels plus synthetic examples.
    Mixed,
    /// Synthetic whole-part examples replace the real ones in training.
    AllFake,
}

impl Condition {
    pub fn as_str(self) -> &'static str {
        match self {
            Condition::NoFake => "nofake",
            Condition::Mixed => "mixed",
            Condition::AllFake => "allfake",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "nofake" => Ok(Condition::NoFake),
            "mixed" => Ok(Condition::Mixed),
            "allfake" => Ok(Condition::AllFake),
            other => Err(Error::Config(format!("unknown condition {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub condition: Condition,
    /// Share of the available synthetic examples used for training.
    pub synth_fraction: f64,
    /// Seeds the synthetic subsample and training.
    pub seed: u64,
    pub train_config: TrainConfig,
    pub classes: Vec<RelationshipLabel>,
    /// Classes averaged into the headline macro scores.
    pub macro_classes: Vec<RelationshipLabel>,
}

impl ExperimentConfig {
    pub fn new(condition: Condition, synth_fraction: f64, seed: u64, train_config: TrainConfig) -> Self {
        Self {
            condition,
            synth_fraction,
            seed,
            train_config,
            classes: RelationshipLabel::ALL.to_vec(),
            macro_classes: RelationshipLabel::WHOLE_PART.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.synth_fraction) {
            return Err(Error::Config(format!(
                "synthetic fraction {} outside [0, 1]",
                self.synth_fraction
            )));
        }
        if self.condition == Condition::NoFake && self.synth_fraction != 0.0 {
            return Err(Error::Config("nofake trains without synthetic examples".into()));
        }
        self.train_config.validate()
    }
}

/// Number of synthetic examples used at `fraction` of `available`.
pub fn synthetic_take(fraction: f64, available: usize) -> usize {
    // the slack keeps products like 0.29 * 100 from flooring one short
    ((fraction * available as f64) + 1e-9).floor().min(available as f64) as usize
}

/// Indices into `examples` of the training set for `config`, plus the test
/// indices. Synthetic examples come after real ones, in input order.
pub fn training_split(examples: &[PairExample], config: &ExperimentConfig) -> Result<(Vec<usize>, Vec<usize>)> {
    config.validate()?;
    let in_classes = |e: &PairExample| config.classes.contains(&e.label);
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut synthetic = Vec::new();
    for (i, e) in examples.iter().enumerate() {
        match e.provenance {
            Provenance::Real if is_test_pair(&e.left_id, &e.right_id) => {
                if in_classes(e) {
                    test.push(i);
                } else {
                    log::warn!("test pair {} / {} has label {} outside the class list", e.left_id, e.right_id, e.label);
                }
            }
            Provenance::Real => {
                let dropped = config.condition == Condition::AllFake && e.label.is_whole_part();
                if in_classes(e) && !dropped {
                    train.push(i);
                }
            }
            Provenance::Synthetic => {
                if in_classes(e) {
                    synthetic.push(i);
                }
            }
        }
    }
    let take = synthetic_take(config.synth_fraction, synthetic.len());
    if take > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_5eb5);
        let mut order = synthetic.clone();
        order.shuffle(&mut rng);
        let mut picked = order[..take].to_vec();
        picked.sort_unstable();
        train.extend(picked);
    }
    if train.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    Ok((train, test))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub left_id: String,
    pub right_id: String,
    pub truth: RelationshipLabel,
    pub predicted: RelationshipLabel,
    pub probabilities: Vec<f64>,
}

/// Predict every example and score against its label.
pub fn evaluate<'e>(
    model: &ClassifierModel,
    examples: impl IntoIterator<Item = &'e PairExample>,
    macro_classes: &[RelationshipLabel],
) -> Result<(MetricsReport, ConfusionMatrix, Vec<Prediction>)> {
    let mut confusion = ConfusionMatrix::new(&model.config.classes);
    let mut predictions = Vec::new();
    for e in examples {
        let (predicted, probabilities) = model.predict(&e.matrix, &e.features)?;
        confusion.record(e.label, predicted)?;
        predictions.push(Prediction {
            left_id: e.left_id.clone(),
            right_id: e.right_id.clone(),
            truth: e.label,
            predicted,
            probabilities,
        });
    }
    let report = compute_metrics(&confusion, macro_classes)?;
    Ok((report, confusion, predictions))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: Condition,
    pub synth_fraction: f64,
    pub seed: u64,
    pub train_real: usize,
    pub train_real_whole_part: usize,
    pub train_synthetic: usize,
    pub train_synthetic_whole_part: usize,
    pub test_size: usize,
    pub metrics: MetricsReport,
    pub confusion: ConfusionMatrix,
    pub history: Vec<EpochStats>,
}

impl ConditionReport {
    pub fn train_size(&self) -> usize {
        self.train_real + self.train_synthetic
    }

    /// Synthetic to real whole-part training examples; `None` without real ones.
    pub fn synthetic_ratio(&self) -> Option<f64> {
        (self.train_real_whole_part > 0)
            .then(|| self.train_synthetic_whole_part as f64 / self.train_real_whole_part as f64)
    }
}

/// Train under `config` and score on the held-out real pairs.
pub fn run_condition(examples: &[PairExample], config: &ExperimentConfig) -> Result<(ConditionReport, ClassifierModel)> {
    let (train_idx, test_idx) = training_split(examples, config)?;
    if test_idx.is_empty() {
        return Err(Error::Config("no real pairs fall in the test split".into()));
    }
    let train_set: Vec<&PairExample> = train_idx.iter().map(|&i| &examples[i]).collect();
    let count = |prov: Provenance, whole_part: bool| {
        train_set
            .iter()
            .filter(|e| e.provenance == prov && (!whole_part || e.label.is_whole_part()))
            .count()
    };
    let train_config = TrainConfig {
        seed: config.seed,
        ..config.train_config.clone()
    };
    log::info!(
        "{} at fraction {}: training on {} pairs",
        config.condition,
        config.synth_fraction,
        train_set.len()
    );
    let (model, history) = nn::train(&train_set, &config.classes, &train_config)?;
    let (metrics, confusion, _) = evaluate(&model, test_idx.iter().map(|&i| &examples[i]), &config.macro_classes)?;
    let report = ConditionReport {
        condition: config.condition,
        synth_fraction: config.synth_fraction,
        seed: config.seed,
        train_real: count(Provenance::Real, false),
        train_real_whole_part: count(Provenance::Real, true),
        train_synthetic: count(Provenance::Synthetic, false),
        train_synthetic_whole_part: count(Provenance::Synthetic, true),
        test_size: test_idx.len(),
        metrics,
        confusion,
        history,
    };
    Ok((report, model))
}

/// One mixed-condition run per fraction, sharing the seed and test split.
pub fn ratio_sweep(examples: &[PairExample], fractions: &[f64], base: &ExperimentConfig) -> Result<Vec<ConditionReport>> {
    if let Some(f) = fractions.iter().find(|f| !(0.0..=1.0).contains(*f)) {
        return Err(Error::Config(format!("fraction {f} outside [0, 1]")));
    }
    fractions
        .iter()
        .map(|&f| {
            let config = ExperimentConfig {
                condition: Condition::Mixed,
                synth_fraction: f,
                ..base.clone()
            };
            Ok(run_condition(examples, &config)?.0)
        })
        .collect()
}

fn fmt_ratio(r: Option<f64>) -> String {
    r.map_or_else(|| "NA".to_string(), |v| format!("{v:.4}"))
}

pub const REPORT_HEADER: [&str; 8] = [
    "condition",
    "synth_fraction",
    "seed",
    "label",
    "precision",
    "recall",
    "f1",
    "support",
];

fn report_rows(r: &ConditionReport) -> Vec<Vec<String>> {
    let head = || vec![r.condition.to_string(), format!("{}", r.synth_fraction), r.seed.to_string()];
    let mut rows: Vec<Vec<String>> = r
        .metrics
        .per_class
        .iter()
        .map(|c| {
            let mut row = head();
            row.extend([
                c.label.to_string(),
                format!("{:.6}", c.precision),
                format!("{:.6}", c.recall),
                format!("{:.6}", c.f1),
                c.support.to_string(),
            ]);
            row
        })
        .collect();
    let macro_name = format!(
        "macro({})",
        r.metrics.macro_classes.iter().map(|c| c.as_str()).collect::<Vec<_>>().join("+")
    );
    let mut row = head();
    row.extend([
        macro_name,
        format!("{:.6}", r.metrics.macro_precision),
        format!("{:.6}", r.metrics.macro_recall),
        format!("{:.6}", r.metrics.macro_f1),
        String::new(),
    ]);
    rows.push(row);
    let mut row = head();
    row.extend([
        "micro".to_string(),
        format!("{:.6}", r.metrics.accuracy),
        format!("{:.6}", r.metrics.accuracy),
        format!("{:.6}", r.metrics.micro_f1),
        r.test_size.to_string(),
    ]);
    rows.push(row);
    rows
}

pub fn render_reports(reports: &[ConditionReport]) -> String {
    crate::tsv::render(&REPORT_HEADER, reports.iter().flat_map(report_rows))
}

/// Human-readable summary of one run.
pub fn summarize(r: &ConditionReport) -> String {
    let m = &r.metrics;
    let mut s = format!(
        "condition {} (synthetic fraction {}, seed {})\n\
         training pairs: {} real ({} whole-part), {} synthetic ({} whole-part), ratio {}\n\
         test pairs: {}\n\
         whole-part macro: precision {:.3} recall {:.3} F1 {:.3}\n\
         micro F1 (equals accuracy here): {:.3}\n",
        r.condition,
        r.synth_fraction,
        r.seed,
        r.train_real,
        r.train_real_whole_part,
        r.train_synthetic,
        r.train_synthetic_whole_part,
        fmt_ratio(r.synthetic_ratio()),
        r.test_size,
        m.macro_precision,
        m.macro_recall,
        m.macro_f1,
        m.micro_f1,
    );
    for c in &m.per_class {
        s.push_str(&format!(
            "  {:<8} P {:.3} R {:.3} F1 {:.3} (n={})\n",
            c.label.as_str(),
            c.precision,
            c.recall,
            c.f1,
            c.support
        ));
    }
    s
}

pub const SWEEP_HEADER: [&str; 8] = [
    "fraction",
    "ratio",
    "synthetic",
    "label",
    "precision",
    "recall",
    "f1",
    "support",
];

pub fn render_sweep_tsv(rows: &[ConditionReport]) -> String {
    crate::tsv::render(
        &SWEEP_HEADER,
        rows.iter().flat_map(|r| {
            let head = vec![
                format!("{}", r.synth_fraction),
                fmt_ratio(r.synthetic_ratio()),
                r.train_synthetic.to_string(),
            ];
            let mut out: Vec<Vec<String>> = r
                .metrics
                .per_class
                .iter()
                .map(|c| {
                    let mut row = head.clone();
                    row.extend([
                        c.label.to_string(),
                        format!("{:.6}", c.precision),
                        format!("{:.6}", c.recall),
                        format!("{:.6}", c.f1),
                        c.support.to_string(),
                    ]);
                    row
                })
                .collect();
            let mut row = head;
            row.extend([
                "macro".to_string(),
                format!("{:.6}", r.metrics.macro_precision),
                format!("{:.6}", r.metrics.macro_recall),
                format!("{:.6}", r.metrics.macro_f1),
                String::new(),
            ]);
            out.push(row);
            out
        }),
    )
}

/// One row per fraction: fraction, ratio, then precision/recall/F1 per class
/// and the macro scores.
pub fn render_sweep_csv(rows: &[ConditionReport]) -> String {
    let Some(first) = rows.first() else {
        return "fraction,ratio\n".to_string();
    };
    let mut header = vec!["fraction".to_string(), "ratio".to_string()];
    for c in &first.metrics.per_class {
        for m in ["precision", "recall", "f1"] {
            header.push(format!("{}_{m}", c.label.as_str().to_lowercase()));
        }
    }
    header.extend(["macro_precision", "macro_recall", "macro_f1"].map(String::from));
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        let mut fields = vec![format!("{}", r.synth_fraction), fmt_ratio(r.synthetic_ratio())];
        for c in &r.metrics.per_class {
            fields.extend([c.precision, c.recall, c.f1].map(|v| format!("{v:.6}")));
        }
        fields.extend(
            [r.metrics.macro_precision, r.metrics.macro_recall, r.metrics.macro_f1].map(|v| format!("{v:.6}")),
        );
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{BookMetadata, Page};
    use crate::nn::Architecture;
    use crate::simmat::{PairFeatures, SimilarityMatrix};
    use RelationshipLabel::*;

    fn book(id: &str, work: Option<&str>, words: u32) -> Book {
        Book::new(
            id,
            vec![Page::new(0, [("w".to_string(), words)])],
            BookMetadata {
                title: id.into(),
                author: "a".into(),
                enumeration_raw: None,
                work_key: work.map(String::from),
            },
        )
        .unwrap()
    }

    #[test]
    fn oversize_boundary() {
        let corpus = vec![book("a", None, 750_001), book("b", None, 750_000)];
        let kept = filter_oversize(corpus, MAX_TRAINING_WORDS);
        assert_eq!(kept.iter().map(|b| b.id.as_str()).collect::<Vec<_>>(), vec!["b"]);
        assert!(filter_oversize(Vec::new(), MAX_TRAINING_WORDS).is_empty());
    }

    #[test]
    fn split_is_symmetric_and_near_twenty_percent() {
        let mut test = 0;
        for i in 0..2000 {
            let (a, b) = (format!("book{i}"), format!("other{}", i * 7));
            assert_eq!(is_test_pair(&a, &b), is_test_pair(&b, &a));
            test += usize::from(is_test_pair(&a, &b));
        }
        assert!((300..500).contains(&test), "{test} of 2000 held out");
    }

    #[test]
    fn diff_pairs_cross_works_once() {
        let books: Vec<Book> = (0..12)
            .map(|i| book(&format!("b{i}"), Some(&format!("w{}", i / 3)), 10))
            .chain([book("loose", None, 10)])
            .collect();
        let exclude: HashSet<(String, String)> = [("b0".to_string(), "b3".to_string())].into();
        let pairs = sample_diff_pairs(&books, 40, 3, &exclude);
        assert_eq!(pairs.len(), 40);
        assert_eq!(pairs, sample_diff_pairs(&books, 40, 3, &exclude));
        let work = |id: &str| books.iter().find(|b| b.id == id).unwrap().metadata.work_key.clone();
        let mut seen = HashSet::new();
        for p in &pairs {
            assert_eq!(p.label, Different);
            assert!(work(&p.left_id) != work(&p.right_id) || work(&p.left_id).is_none());
            let key = if p.left_id < p.right_id {
                (p.left_id.clone(), p.right_id.clone())
            } else {
                (p.right_id.clone(), p.left_id.clone())
            };
            assert!(seen.insert(key.clone()));
            assert_ne!(key, ("b0".to_string(), "b3".to_string()));
        }
        // 78 pairs among 13 books, 12 within a work, one excluded
        assert_eq!(sample_diff_pairs(&books, 500, 3, &exclude).len(), 65);
    }

    #[test]
    fn synthetic_take_floors() {
        assert_eq!(synthetic_take(0.0, 10), 0);
        assert_eq!(synthetic_take(0.25, 10), 2);
        assert_eq!(synthetic_take(0.29, 100), 29);
        assert_eq!(synthetic_take(1.0, 10), 10);
    }

    /// Examples whose class shows up as a bright row band; 10x10 matrices.
    fn toy_examples(n_real: usize, n_synth: usize) -> Vec<PairExample> {
        let labels = [SameWork, DifferentVolume, PartOf, Contains, Different];
        let make = |i: usize, label: RelationshipLabel, provenance: Provenance| {
            let k = RelationshipLabel::ALL.iter().position(|&l| l == label).unwrap();
            let mut values = vec![0.1f32; 100];
            for c in 0..10 {
                values[(k + 2) * 10 + c] = 0.9;
            }
            values[i % 100] += 0.05;
            PairExample {
                left_id: format!("{}{i}", provenance.as_str()),
                right_id: format!("x{i}"),
                matrix: SimilarityMatrix {
                    size: 10,
                    left_chunks: 10,
                    right_chunks: 10,
                    values,
                },
                features: PairFeatures {
                    vector: vec![k as f64, 1.0, (i % 3) as f64, 0.5],
                    d: 2,
                },
                label,
                provenance,
            }
        };
        let mut out: Vec<PairExample> = (0..n_real)
            .map(|i| make(i, labels[i % labels.len()], Provenance::Real))
            .collect();
        let synth = [Contains, PartOf, Overlaps];
        out.extend((0..n_synth).map(|i| make(i, synth[i % 3], Provenance::Synthetic)));
        out
    }

    fn tiny_config(condition: Condition, fraction: f64) -> ExperimentConfig {
        let train = TrainConfig {
            epochs: 3,
            batch_size: 8,
            architecture: Architecture {
                conv1_filters: 2,
                conv2_filters: 2,
                kernel_size: 3,
                pair_hidden: 4,
                merge_hidden: 4,
            },
            ..TrainConfig::default()
        };
        ExperimentConfig::new(condition, fraction, 7, train)
    }

    #[test]
    fn splits_respect_the_conditions() {
        let ex = toy_examples(200, 60);
        let (train, test) = training_split(&ex, &tiny_config(Condition::NoFake, 0.0)).unwrap();
        assert!(!test.is_empty());
        assert!(test.iter().all(|&i| ex[i].provenance == Provenance::Real));
        assert!(train.iter().all(|&i| ex[i].provenance == Provenance::Real));
        assert!(train.iter().all(|i| !test.contains(i)));
        assert_eq!(train.len() + test.len(), 200);

        let (mixed, mixed_test) = training_split(&ex, &tiny_config(Condition::Mixed, 0.5)).unwrap();
        assert_eq!(mixed_test, test);
        let synth: Vec<usize> = mixed.iter().copied().filter(|&i| ex[i].provenance == Provenance::Synthetic).collect();
        assert_eq!(synth.len(), 30);
        let (full, _) = training_split(&ex, &tiny_config(Condition::Mixed, 1.0)).unwrap();
        assert!(synth.iter().all(|i| full.contains(i)));

        let (allfake, allfake_test) = training_split(&ex, &tiny_config(Condition::AllFake, 1.0)).unwrap();
        assert_eq!(allfake_test, test);
        assert!(allfake
            .iter()
            .all(|&i| !(ex[i].provenance == Provenance::Real && ex[i].label.is_whole_part())));
        assert!(test.iter().any(|&i| ex[i].label.is_whole_part()));

        assert!(training_split(&ex, &tiny_config(Condition::NoFake, 0.5)).is_err());
        assert!(training_split(&ex, &tiny_config(Condition::Mixed, 1.5)).is_err());
        let synthetic_only: Vec<PairExample> = ex[200..].to_vec();
        assert!(training_split(&synthetic_only, &tiny_config(Condition::NoFake, 0.0)).is_err());
    }

    #[test]
    fn conditions_are_deterministic_and_sweep_endpoints_match() {
        let ex = toy_examples(120, 30);
        let nofake = run_condition(&ex, &tiny_config(Condition::NoFake, 0.0)).unwrap().0;
        assert_eq!(nofake, run_condition(&ex, &tiny_config(Condition::NoFake, 0.0)).unwrap().0);
        assert_eq!(nofake.train_synthetic, 0);
        let mixed = run_condition(&ex, &tiny_config(Condition::Mixed, 1.0)).unwrap().0;
        assert_eq!(mixed.train_synthetic, 30);

        let sweep = ratio_sweep(&ex, &[0.0, 1.0], &tiny_config(Condition::Mixed, 1.0)).unwrap();
        assert_eq!(sweep[0].metrics, nofake.metrics);
        assert_eq!(sweep[0].history, nofake.history);
        assert_eq!(sweep[1], mixed);
        assert!(ratio_sweep(&ex, &[0.0, 1.2], &tiny_config(Condition::Mixed, 1.0)).is_err());

        let csv = render_sweep_csv(&sweep);
        assert!(csv.starts_with("fraction,ratio,sw_precision,sw_recall,sw_f1,"));
        assert_eq!(csv.lines().count(), 3);
        let tsv = render_sweep_tsv(&sweep);
        assert!(tsv.lines().next().unwrap().starts_with("fraction\tratio\tsynthetic"));
        assert!(render_reports(&[nofake.clone()]).contains("macro(PARTOF+CONTAINS)"));
        assert!(summarize(&nofake).contains("nofake"));
    }

    #[test]
    fn condition_names_round_trip() {
        for c in [Condition::NoFake, Condition::Mixed, Condition::AllFake] {
            assert_eq!(c.as_str().parse::<Condition>().unwrap(), c);
        }
        assert!("fake".parse::<Condition>().is_err());
    }
}
