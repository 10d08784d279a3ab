//! Deterministic toy corpus standing in for a scanned library collection.
//!
//! Every work is one topic. Its text is divided into sections, each drawing
//! from its own sub-vocabulary of the work topic; embedding vectors for those
//! words mix a work direction with a section direction. Chunks of the same
//! section are therefore near-identical, other sections of the same work are
//! moderately similar and other works are unrelated, which gives similarity
//! matrices the diagonal structure of real book pairs.
//!
//! Each physical book is a "scan": random front and back matter pages around
//! the content, with a small share of tokens replaced by background words.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::experiment::{filter_oversize, sample_diff_pairs, Featurizer, MAX_TRAINING_WORDS};
use crate::corpus::{Book, BookMetadata, Page};
use crate::embed::EmbeddingTable;
use crate::enumparse::{self, CatalogRow};
use crate::error::{Error, Result};
use crate::synth::{self, SynthOutput, SynthPlan};
use crate::types::{LabeledPair, PairExample, Provenance, RelationshipLabel};

/// Chunk size matched to the demo books, which run from about 600 to 24,000 words.
pub const DEMO_CHUNK_SIZE: u64 = 250;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VocabModel {
    /// Probability that a content token comes from the work topic.
    pub topic_weight: f64,
    pub section_words: usize,
    pub background_words: usize,
    pub matter_words: usize,
    pub embedding_dim: usize,
    /// Weight of the shared work direction in a section word's vector.
    pub work_share: f64,
    /// Probability that a scanned token is replaced by a background word.
    pub ocr_noise: f64,
    /// Weight of one direction shared by every word vector. Trained embeddings
    /// have such a common component, which compresses chunk cosines into a
    /// narrow band.
    pub common_share: f64,
}

impl Default for VocabModel {
    fn default() -> Self {
        Self {
            topic_weight: 0.8,
            section_words: 16,
            background_words: 400,
            matter_words: 40,
            embedding_dim: 32,
            work_share: 0.6,
            ocr_noise: 0.03,
            common_share: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DemoConfig {
    /// Multi-volume works.
    pub n_works: usize,
    pub vols_per_work: usize,
    /// Inclusive range of physical copies per volume.
    pub copies_per_volume: (usize, usize),
    /// How many of the works also have a combined multi-volume book.
    pub combined_works: usize,
    /// Inclusive range of volumes bound into a combined book.
    pub combined_span: (usize, usize),
    /// Single-volume short works.
    pub short_works: usize,
    /// Pairs of anthologies that share one short work.
    pub planted_overlaps: usize,
    /// Inclusive page ranges.
    pub volume_pages: (usize, usize),
    pub short_pages: (usize, usize),
    pub matter_pages: (usize, usize),
    pub pages_per_section: usize,
    pub words_per_page: u32,
    pub vocab: VocabModel,
    pub seed: u64,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self {
            n_works: 20,
            vols_per_work: 4,
            copies_per_volume: (1, 2),
            combined_works: 10,
            combined_span: (2, 4),
            short_works: 40,
            planted_overlaps: 10,
            volume_pages: (40, 200),
            short_pages: (20, 50),
            matter_pages: (2, 10),
            pages_per_section: 20,
            words_per_page: 30,
            vocab: VocabModel::default(),
            seed: 0,
        }
    }
}

impl DemoConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_works", self.n_works),
            ("vols_per_work", self.vols_per_work),
            ("copies_per_volume", self.copies_per_volume.0),
            ("pages_per_section", self.pages_per_section),
            ("words_per_page", self.words_per_page as usize),
            ("section_words", self.vocab.section_words),
            ("background_words", self.vocab.background_words),
            ("matter_words", self.vocab.matter_words),
            ("embedding_dim", self.vocab.embedding_dim),
            ("volume_pages", self.volume_pages.0),
            ("short_pages", self.short_pages.0),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        for (name, (lo, hi)) in [
            ("volume_pages", self.volume_pages),
            ("short_pages", self.short_pages),
            ("matter_pages", self.matter_pages),
            ("copies_per_volume", self.copies_per_volume),
            ("combined_span", self.combined_span),
        ] {
            if lo > hi {
                return Err(Error::Config(format!("{name} range is empty")));
            }
        }
        if self.combined_works > self.n_works
            || (self.combined_works > 0
                && (self.combined_span.0 < 2 || self.combined_span.1 > self.vols_per_work))
        {
            return Err(Error::Config(
                "combined books span between two and vols_per_work volumes".into(),
            ));
        }
        if 3 * self.planted_overlaps > self.short_works {
            return Err(Error::Config(format!(
                "{} planted overlap pairs need {} short works",
                self.planted_overlaps,
                3 * self.planted_overlaps
            )));
        }
        for (name, p) in [
            ("topic_weight", self.vocab.topic_weight),
            ("work_share", self.vocab.work_share),
            ("ocr_noise", self.vocab.ocr_noise),
            ("common_share", self.vocab.common_share),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must lie in [0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct DemoCorpus {
    pub books: Vec<Book>,
    pub embeddings: EmbeddingTable,
    pub catalog: Vec<CatalogRow>,
    /// Anthology pairs sharing content, `(left, right)`.
    pub planted_overlaps: Vec<(String, String)>,
}

impl DemoCorpus {
    pub fn planted_ids(&self) -> HashSet<&str> {
        self.planted_overlaps
            .iter()
            .flat_map(|(a, b)| [a.as_str(), b.as_str()])
            .collect()
    }
}

/// Text before scanning: pages as lists of token ids.
type Text = Vec<Vec<usize>>;

struct Generator<'c> {
    config: &'c DemoConfig,
    rng: ChaCha8Rng,
    words: Vec<String>,
    vectors: Vec<Vec<f64>>,
    background: std::ops::Range<usize>,
    matter: std::ops::Range<usize>,
}

const SINGLE_FORMS: [&str; 6] = ["v.{}", "v{}", "volume {}", "V. {}", "vol. {}", "Vol {}"];
const RANGE_FORMS: [&str; 4] = ["v.{}-{}", "V. {} - {}", "vols. {}-{}", "v.{}-v.{}"];

impl<'c> Generator<'c> {
    fn new(config: &'c DemoConfig) -> Self {
        let mut g = Generator {
            config,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            words: Vec::new(),
            vectors: Vec::new(),
            background: 0..0,
            matter: 0..0,
        };
        let start = g.words.len();
        for i in 0..config.vocab.background_words {
            let v = g.unit();
            g.push_word(format!("bg{i}"), v);
        }
        g.background = start..g.words.len();
        let start = g.words.len();
        for i in 0..config.vocab.matter_words {
            let v = g.unit();
            g.push_word(format!("mt{i}"), v);
        }
        g.matter = start..g.words.len();
        g
    }

    fn push_word(&mut self, word: String, vector: Vec<f64>) {
        self.words.push(word);
        self.vectors.push(vector);
    }

    /// Random direction (uniform cube, normalized).
    fn unit(&mut self) -> Vec<f64> {
        let d = self.config.vocab.embedding_dim;
        loop {
            let v: Vec<f64> = (0..d).map(|_| self.rng.gen_range(-1.0..1.0)).collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 1e-6 {
                return v.into_iter().map(|x| x / n).collect();
            }
        }
    }

    /// Vocabulary for one section of a work with direction `work_dir`.
    fn section_vocab(&mut self, prefix: &str, work_dir: &[f64]) -> Vec<usize> {
        let share = self.config.vocab.work_share;
        let own = (1.0 - share * share).sqrt();
        let section_dir = self.unit();
        (0..self.config.vocab.section_words)
            .map(|j| {
                let jitter = self.unit();
                let v = work_dir
                    .iter()
                    .zip(&section_dir)
                    .zip(&jitter)
                    .map(|((w, s), n)| share * w + own * s + 0.15 * n)
                    .collect();
                self.push_word(format!("{prefix}_{j}"), v);
                self.words.len() - 1
            })
            .collect()
    }

    /// Content pages for a text unit of `pages` pages.
    fn text(&mut self, prefix: &str, work_dir: &[f64], pages: usize) -> Text {
        let per = self.config.pages_per_section;
        let sections = pages.div_ceil(per);
        let vocabs: Vec<Vec<usize>> = (0..sections)
            .map(|s| self.section_vocab(&format!("{prefix}s{s}"), work_dir))
            .collect();
        (0..pages)
            .map(|p| {
                let vocab = &vocabs[p / per];
                (0..self.config.words_per_page)
                    .map(|_| {
                        if self.rng.gen_bool(self.config.vocab.topic_weight) {
                            vocab[self.rng.gen_range(0..vocab.len())]
                        } else {
                            self.rng.gen_range(self.background.clone())
                        }
                    })
                    .collect()
            })
            .collect()
    }

    fn matter_page(&mut self) -> Vec<usize> {
        (0..self.config.words_per_page)
            .map(|_| {
                if self.rng.gen_bool(0.8) {
                    self.rng.gen_range(self.matter.clone())
                } else {
                    self.rng.gen_range(self.background.clone())
                }
            })
            .collect()
    }

    /// Uniform draw from an inclusive range.
    fn draw(&mut self, range: (usize, usize)) -> usize {
        self.rng.gen_range(range.0..=range.1)
    }

    /// One physical copy: fresh front and back matter and OCR noise.
    fn scan(&mut self, id: String, content: &[&Text], metadata: BookMetadata) -> Result<Book> {
        let front = self.draw(self.config.matter_pages);
        let back = self.draw(self.config.matter_pages);
        let mut raw: Vec<Vec<usize>> = (0..front).map(|_| self.matter_page()).collect();
        for text in content {
            for page in text.iter() {
                let noisy = page
                    .iter()
                    .map(|&t| {
                        if self.rng.gen_bool(self.config.vocab.ocr_noise) {
                            self.rng.gen_range(self.background.clone())
                        } else {
                            t
                        }
                    })
                    .collect();
                raw.push(noisy);
            }
        }
        raw.extend((0..back).map(|_| self.matter_page()));
        let pages = raw
            .into_iter()
            .enumerate()
            .map(|(i, ids)| {
                let mut counts: BTreeMap<&str, u32> = BTreeMap::new();
                for t in ids {
                    *counts.entry(self.words[t].as_str()).or_insert(0) += 1;
                }
                Page::new(i, counts.into_iter().map(|(w, n)| (w.to_string(), n)))
            })
            .collect();
        Book::new(id, pages, metadata)
    }

    fn single_form(&mut self, v: usize) -> String {
        let form = SINGLE_FORMS[self.rng.gen_range(0..SINGLE_FORMS.len())];
        form.replacen("{}", &v.to_string(), 1)
    }

    fn range_form(&mut self, a: usize, b: usize) -> String {
        let form = RANGE_FORMS[self.rng.gen_range(0..RANGE_FORMS.len())];
        form.replacen("{}", &a.to_string(), 1).replacen("{}", &b.to_string(), 1)
    }
}

/// Build the demo corpus, its embedding table and its enumeration catalog.
pub fn generate_demo_corpus(config: &DemoConfig) -> Result<DemoCorpus> {
    config.validate()?;
    let mut g = Generator::new(config);
    let mut books = Vec::new();

    for w in 0..config.n_works {
        let work_dir = g.unit();
        let texts: Vec<Text> = (1..=config.vols_per_work)
            .map(|v| {
                let pages = g.draw(config.volume_pages);
                g.text(&format!("w{w:02}v{v}"), &work_dir, pages)
            })
            .collect();
        let meta = |enumeration: String| BookMetadata {
            title: format!("Collected writings {w:02}"),
            author: format!("Author {w:02}"),
            enumeration_raw: Some(enumeration),
            work_key: Some(format!("work-{w:02}")),
        };
        for (v, text) in texts.iter().enumerate() {
            let copies = g.draw(config.copies_per_volume);
            for c in 1..=copies {
                let enumeration = g.single_form(v + 1);
                books.push(g.scan(format!("demo.w{w:02}.v{}.c{c}", v + 1), &[text], meta(enumeration))?);
            }
        }
        if w < config.combined_works {
            let span = g.draw(config.combined_span);
            let first = g.rng.gen_range(1..=config.vols_per_work + 1 - span);
            let last = first + span - 1;
            let content: Vec<&Text> = texts[first - 1..last].iter().collect();
            let enumeration = g.range_form(first, last);
            books.push(g.scan(format!("demo.w{w:02}.v{first}-{last}"), &content, meta(enumeration))?);
        }
    }

    let mut shorts: Vec<Text> = Vec::with_capacity(config.short_works);
    for s in 0..config.short_works {
        let dir = g.unit();
        let pages = g.draw(config.short_pages);
        let text = g.text(&format!("s{s:02}"), &dir, pages);
        let metadata = BookMetadata {
            title: format!("Short work {s:02}"),
            author: format!("Writer {s:02}"),
            enumeration_raw: None,
            work_key: Some(format!("short-{s:02}")),
        };
        books.push(g.scan(format!("demo.s{s:02}"), &[&text], metadata)?);
        shorts.push(text);
    }

    let mut order: Vec<usize> = (0..config.short_works).collect();
    order.shuffle(&mut g.rng);
    let mut planted_overlaps = Vec::with_capacity(config.planted_overlaps);
    for (p, trio) in order.chunks_exact(3).take(config.planted_overlaps).enumerate() {
        let (shared, a, b) = (&shorts[trio[0]], &shorts[trio[1]], &shorts[trio[2]]);
        let mut ids = Vec::with_capacity(2);
        for (side, private) in [("a", a), ("b", b)] {
            let content: [&Text; 2] = if g.rng.gen_bool(0.5) {
                [private, shared]
            } else {
                [shared, private]
            };
            let id = format!("demo.p{p:02}.{side}");
            let metadata = BookMetadata {
                title: format!("Collection {p:02}{side}"),
                author: "Various".into(),
                enumeration_raw: None,
                work_key: Some(format!("collection-{p:02}{side}")),
            };
            books.push(g.scan(id.clone(), &content, metadata)?);
            ids.push(id);
        }
        planted_overlaps.push((ids[0].clone(), ids[1].clone()));
    }

    let common = g.unit();
    let share = config.vocab.common_share;
    let mut embeddings = EmbeddingTable::new(config.vocab.embedding_dim)?;
    for (w, v) in g.words.iter().zip(g.vectors) {
        let v = v.iter().zip(&common).map(|(x, c)| share * c + (1.0 - share) * x).collect();
        embeddings.insert(w, v)?;
    }
    let catalog = enumparse::catalog_from_books(&books);
    Ok(DemoCorpus {
        books,
        embeddings,
        catalog,
        planted_overlaps,
    })
}

/// Labels implied by the catalog's enumerations.
pub fn catalog_labels(catalog: &[CatalogRow]) -> Vec<LabeledPair> {
    enumparse::infer_relations(&enumparse::catalog_entries(catalog))
        .into_iter()
        .map(|r| LabeledPair::new(r.left_id, r.right_id, r.label, Provenance::Real))
        .collect()
}

/// Real ground truth for a corpus: catalog relations plus `diff_pairs`
/// sampled unrelated pairs.
pub fn real_labels(books: &[Book], catalog: &[CatalogRow], diff_pairs: usize, seed: u64) -> Vec<LabeledPair> {
    let mut pairs = catalog_labels(catalog);
    let known: HashSet<(String, String)> = pairs
        .iter()
        .map(|p| (p.left_id.clone(), p.right_id.clone()))
        .collect();
    pairs.extend(sample_diff_pairs(books, diff_pairs, seed, &known));
    pairs
}

/// Unrelated pairs needed so that `whole_part` of `labeled + diff` pairs make
/// up at most `share`.
pub fn diff_pairs_for_share(labeled: usize, whole_part: usize, share: f64) -> usize {
    if share <= 0.0 || whole_part == 0 {
        return 0;
    }
    let total = (whole_part as f64 / share).ceil() as usize;
    total.saturating_sub(labeled)
}

/// A featurized end-to-end demo experiment.
#[derive(Debug, Clone)]
pub struct DemoData {
    pub corpus: DemoCorpus,
    pub real_pairs: Vec<LabeledPair>,
    pub synth: SynthOutput,
    /// Real pairs followed by synthetic pairs.
    pub examples: Vec<PairExample>,
    /// The planted anthology pairs, labeled by the catalog as unrelated.
    pub planted: Vec<PairExample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DemoPipeline {
    pub corpus: DemoConfig,
    pub synth: SynthPlan,
    /// Minimum number of sampled unrelated pairs.
    pub diff_pairs: usize,
    /// When set, sample enough unrelated pairs that real whole-part labels
    /// are at most this share of all real pairs.
    pub whole_part_share: Option<f64>,
    pub chunk_size: u64,
    pub matrix_size: usize,
}

impl Default for DemoPipeline {
    fn default() -> Self {
        Self {
            corpus: DemoConfig::default(),
            synth: SynthPlan {
                anthology: 100,
                combined: 80,
                split: 100,
                overlap: 60,
            },
            diff_pairs: 0,
            whole_part_share: Some(0.012),
            chunk_size: DEMO_CHUNK_SIZE,
            matrix_size: crate::simmat::DEFAULT_MATRIX_SIZE,
        }
    }
}

/// Generate, label, synthesize and featurize. The planted anthologies are kept
/// out of training pairs and synthesis so they stay unseen until evaluation.
pub fn demo_dataset(pipeline: &DemoPipeline) -> Result<DemoData> {
    let corpus = generate_demo_corpus(&pipeline.corpus)?;
    let planted = corpus.planted_ids();
    let training_books: Vec<Book> = filter_oversize(
        corpus
            .books
            .iter()
            .filter(|b| !planted.contains(b.id.as_str()))
            .cloned()
            .collect(),
        MAX_TRAINING_WORDS,
    );
    let seed = pipeline.corpus.seed;
    let training_ids: HashSet<&str> = training_books.iter().map(|b| b.id.as_str()).collect();
    let catalog: Vec<CatalogRow> = corpus
        .catalog
        .iter()
        .filter(|r| training_ids.contains(r.book_id.as_str()))
        .cloned()
        .collect();
    let labeled = catalog_labels(&catalog);
    let whole_part = labeled.iter().filter(|p| p.label.is_whole_part()).count();
    let diff = pipeline.whole_part_share.map_or(pipeline.diff_pairs, |share| {
        pipeline
            .diff_pairs
            .max(diff_pairs_for_share(labeled.len(), whole_part, share))
    });
    let real_pairs = real_labels(&training_books, &catalog, diff, seed ^ 0xd1ff);
    let synth = synth::generate(&training_books, &pipeline.synth, seed ^ 0x5717)?;

    let all_books = corpus.books.iter().chain(synth.books.iter().map(|s| &s.book));
    let mut featurizer = Featurizer::new(all_books, &corpus.embeddings, pipeline.chunk_size, pipeline.matrix_size)?;
    let mut examples = featurizer.featurize_all(&real_pairs)?;
    examples.extend(featurizer.featurize_all(&synth.pairs)?);
    let planted_pairs: Vec<LabeledPair> = corpus
        .planted_overlaps
        .iter()
        .map(|(a, b)| LabeledPair::new(a, b, RelationshipLabel::Different, Provenance::Real))
        .collect();
    let planted = featurizer.featurize_all(&planted_pairs)?;
    drop(featurizer);
    Ok(DemoData {
        corpus,
        real_pairs,
        synth,
        examples,
        planted,
    })
}
