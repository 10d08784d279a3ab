//! Artificial books built by cutting up and stitching together real ones.
//!
//! Four constructions are supported:
//!
//! * **anthology**: several short books are trimmed of their front and back
//!   matter and their middles are concatenated between the front and back
//!   matter of one of them (the donor);
//! * **combined**: the same construction over different volumes of one work;
//! * **split**: the middle of a long book is cut into 2 to 4 contiguous parts;
//! * **overlap pair**: two anthologies that share at least one component but
//!   each also hold a component the other lacks.
//!
//! Every recipe runs on its own ChaCha stream seeded from the recipe seed, so
//! output is a pure function of the inputs and the seed.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::corpus::{self, Book, BookMetadata, Page};
use crate::enumparse::Enumeration;
use crate::error::{Error, Result};
use crate::types::{LabeledPair, Provenance, RelationshipLabel};

/// Most pages removed from either end of a book when separating its matter.
pub const MAX_TRIM: usize = 10;
/// Books shorter than this corpus length percentile feed anthologies.
pub const SHORT_BOOK_PERCENTILE: f64 = 0.40;
const MIN_COMPONENTS: usize = 2;
const MAX_COMPONENTS: usize = 5;
const MIN_SPLIT_PARTS: usize = 2;
const MAX_SPLIT_PARTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    Anthology,
    Combined,
    Split,
    OverlapPair,
}

impl SynthKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SynthKind::Anthology => "anthology",
            SynthKind::Combined => "combined",
            SynthKind::Split => "split",
            SynthKind::OverlapPair => "overlap",
        }
    }

    fn salt(self) -> u64 {
        match self {
            SynthKind::Anthology => 0x616e_7468,
            SynthKind::Combined => 0x636f_6d62,
            SynthKind::Split => 0x7370_6c74,
            SynthKind::OverlapPair => 0x6f76_6572,
        }
    }
}

impl std::str::FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "anthology" => Ok(SynthKind::Anthology),
            "combined" => Ok(SynthKind::Combined),
            "split" => Ok(SynthKind::Split),
            "overlap" | "overlap_pair" => Ok(SynthKind::OverlapPair),
            other => Err(Error::Config(format!("unknown synthetic kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthRecipe {
    pub kind: SynthKind,
    pub component_ids: Vec<String>,
    pub seed: u64,
    /// `(front_removed, back_removed)` for each component, in component order.
    pub trims: Vec<(usize, usize)>,
    /// Component whose front and back matter frame the book; `None` for splits.
    pub donor: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthBook {
    pub book: Book,
    pub recipe: SynthRecipe,
    /// Relation of this book to each source, read as "this book <label> other".
    pub relations: Vec<(String, RelationshipLabel)>,
}

impl SynthBook {
    /// Both directions of every relation, as synthetic training pairs.
    pub fn pairs(&self) -> Vec<LabeledPair> {
        let mut out = Vec::with_capacity(2 * self.relations.len());
        for (other, label) in &self.relations {
            out.push(LabeledPair::new(&self.book.id, other, *label, Provenance::Synthetic));
            out.push(LabeledPair::new(other, &self.book.id, label.inverse(), Provenance::Synthetic));
        }
        out
    }

    pub fn to_json(&self) -> Value {
        let mut value = self.book.to_json();
        let relations: Vec<Value> = self
            .relations
            .iter()
            .map(|(id, label)| serde_json::json!({ "other_id": id, "label": label }))
            .collect();
        let obj = value.as_object_mut().expect("book json is an object");
        obj.insert(
            "recipe".into(),
            serde_json::to_value(&self.recipe).expect("recipe serializes"),
        );
        obj.insert("relations".into(), Value::Array(relations));
        value
    }

    pub fn from_json(value: &Value, path: &std::path::Path) -> Result<Self> {
        let book = Book::from_json(value, path)?;
        let fail = |message: String| Error::BookFormat {
            path: path.to_path_buf(),
            message,
        };
        let recipe: SynthRecipe = serde_json::from_value(
            value
                .get("recipe")
                .cloned()
                .ok_or_else(|| fail("missing \"recipe\"".into()))?,
        )
        .map_err(|e| fail(format!("bad recipe: {e}")))?;
        #[derive(Deserialize)]
        struct Rel {
            other_id: String,
            label: RelationshipLabel,
        }
        let rels: Vec<Rel> = serde_json::from_value(
            value
                .get("relations")
                .cloned()
                .ok_or_else(|| fail("missing \"relations\"".into()))?,
        )
        .map_err(|e| fail(format!("bad relations: {e}")))?;
        Ok(SynthBook {
            book,
            recipe,
            relations: rels.into_iter().map(|r| (r.other_id, r.label)).collect(),
        })
    }
}

/// A book split into front matter, content and back matter.
#[derive(Debug, Clone, Copy)]
pub struct Trimmed<'a> {
    pub book: &'a Book,
    pub front_removed: usize,
    pub back_removed: usize,
}

impl<'a> Trimmed<'a> {
    pub fn front(&self) -> &'a [Page] {
        &self.book.pages[..self.front_removed]
    }

    pub fn middle(&self) -> &'a [Page] {
        &self.book.pages[self.front_removed..self.book.pages.len() - self.back_removed]
    }

    pub fn back(&self) -> &'a [Page] {
        &self.book.pages[self.book.pages.len() - self.back_removed..]
    }
}

/// Largest trim allowed at either end so that the middle keeps a page.
pub fn trim_limit(pages: usize) -> usize {
    pages.saturating_sub(1) / 2
}

/// Remove `front` and `back` pages, each clamped to [`trim_limit`].
pub fn trim_with(book: &Book, front: usize, back: usize) -> Trimmed<'_> {
    let limit = trim_limit(book.pages.len());
    Trimmed {
        book,
        front_removed: front.min(limit),
        back_removed: back.min(limit),
    }
}

/// Draw front and back trims uniformly from `0..=10` and apply them.
pub fn trim_matter<'a, R: Rng>(book: &'a Book, rng: &mut R) -> Trimmed<'a> {
    let front = rng.gen_range(0..=MAX_TRIM);
    let back = rng.gen_range(0..=MAX_TRIM);
    trim_with(book, front, back)
}

/// Pages of `component` that a recipe with the given trim placed in a synthetic book.
pub fn component_middle(component: &Book, trim: (usize, usize)) -> &[Page] {
    trim_with(component, trim.0, trim.1).middle()
}

/// Start of the first contiguous run of `needle` inside `haystack`, comparing
/// page contents only.
pub fn find_run(haystack: &[Page], needle: &[Page]) -> Option<usize> {
    if needle.is_empty() {
        return Some(0);
    }
    if needle.len() > haystack.len() {
        return None;
    }
    (0..=haystack.len() - needle.len()).find(|&start| {
        haystack[start..start + needle.len()]
            .iter()
            .zip(needle)
            .all(|(a, b)| a.same_content(b))
    })
}

fn synth_id(kind: SynthKind, seed: u64, n: usize) -> String {
    format!("synth:{}:{seed}:{n}", kind.as_str())
}

fn reindex(pages: impl IntoIterator<Item = Page>) -> Vec<Page> {
    pages
        .into_iter()
        .enumerate()
        .map(|(i, p)| Page { index: i, ..p })
        .collect()
}

fn check_distinct(books: &[&Book]) -> Result<()> {
    let mut seen = HashSet::new();
    for b in books {
        if !seen.insert(b.id.as_str()) {
            return Err(Error::Synth(format!("component {} appears twice", b.id)));
        }
    }
    Ok(())
}

fn assemble(
    kind: SynthKind,
    seed: u64,
    n: usize,
    parts: &[Trimmed<'_>],
    donor: usize,
) -> Result<SynthBook> {
    let donor_part = &parts[donor];
    let mut pages: Vec<Page> = donor_part.front().to_vec();
    for p in parts {
        pages.extend_from_slice(p.middle());
    }
    pages.extend_from_slice(donor_part.back());
    let titles: Vec<&str> = parts.iter().map(|p| p.book.metadata.title.as_str()).collect();
    let metadata = BookMetadata {
        title: format!("{}: {}", kind.as_str(), titles.join("; ")),
        author: donor_part.book.metadata.author.clone(),
        enumeration_raw: None,
        work_key: None,
    };
    let book = Book::new(synth_id(kind, seed, n), reindex(pages), metadata)?;
    let relations = parts
        .iter()
        .map(|p| (p.book.id.clone(), RelationshipLabel::Contains))
        .collect();
    Ok(SynthBook {
        book,
        recipe: SynthRecipe {
            kind,
            component_ids: parts.iter().map(|p| p.book.id.clone()).collect(),
            seed,
            trims: parts.iter().map(|p| (p.front_removed, p.back_removed)).collect(),
            donor: Some(donor),
        },
        relations,
    })
}

fn build_anthology(kind: SynthKind, components: &[&Book], seed: u64) -> Result<SynthBook> {
    if components.len() < MIN_COMPONENTS {
        return Err(Error::Synth(format!(
            "{} needs at least {MIN_COMPONENTS} components, got {}",
            kind.as_str(),
            components.len()
        )));
    }
    check_distinct(components)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let donor = rng.gen_range(0..components.len());
    let parts: Vec<Trimmed<'_>> = components.iter().map(|b| trim_matter(b, &mut rng)).collect();
    assemble(kind, seed, 0, &parts, donor)
}

/// Concatenate the middles of `components` between the front and back matter
/// of a randomly chosen donor. The result CONTAINS every component.
pub fn make_anthology(components: &[&Book], seed: u64) -> Result<SynthBook> {
    build_anthology(SynthKind::Anthology, components, seed)
}

/// Anthology construction over volumes of a single work.
pub fn make_combined(volumes: &[&Book], seed: u64) -> Result<SynthBook> {
    let key = volumes.first().and_then(|b| b.metadata.work_key.as_deref());
    if key.is_none() || volumes.iter().any(|b| b.metadata.work_key.as_deref() != key) {
        return Err(Error::Synth(
            "combined volumes must all share one work key".into(),
        ));
    }
    build_anthology(SynthKind::Combined, volumes, seed)
}

/// Cut `middle` at the given sorted, distinct interior positions.
pub fn split_at_cuts<'a>(middle: &'a [Page], cuts: &[usize]) -> Vec<&'a [Page]> {
    let mut parts = Vec::with_capacity(cuts.len() + 1);
    let mut start = 0;
    for &cut in cuts {
        parts.push(&middle[start..cut]);
        start = cut;
    }
    parts.push(&middle[start..]);
    parts
}

/// Split the middle of a long book into 2 to 4 contiguous parts, each PARTOF
/// the source. `threshold` is the corpus short-book word count; the source
/// must be longer.
pub fn make_split(book: &Book, threshold: u64, seed: u64) -> Result<Vec<SynthBook>> {
    if book.word_count() <= threshold {
        return Err(Error::Synth(format!(
            "{} has {} words, not above the short-book threshold {threshold}",
            book.id,
            book.word_count()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trimmed = trim_matter(book, &mut rng);
    let middle = trimmed.middle();
    if middle.len() < MIN_SPLIT_PARTS {
        return Err(Error::Synth(format!(
            "{} has too few content pages to split",
            book.id
        )));
    }
    let k = rng.gen_range(MIN_SPLIT_PARTS..=MAX_SPLIT_PARTS).min(middle.len());
    let mut cuts = rand::seq::index::sample(&mut rng, middle.len() - 1, k - 1)
        .into_iter()
        .map(|i| i + 1)
        .collect::<Vec<_>>();
    cuts.sort_unstable();
    let recipe = SynthRecipe {
        kind: SynthKind::Split,
        component_ids: vec![book.id.clone()],
        seed,
        trims: vec![(trimmed.front_removed, trimmed.back_removed)],
        donor: None,
    };
    split_at_cuts(middle, &cuts)
        .into_iter()
        .enumerate()
        .map(|(n, part)| {
            let metadata = BookMetadata {
                title: format!("{} (part {})", book.metadata.title, n + 1),
                author: book.metadata.author.clone(),
                enumeration_raw: None,
                work_key: None,
            };
            Ok(SynthBook {
                book: Book::new(synth_id(SynthKind::Split, seed, n), reindex(part.to_vec()), metadata)?,
                recipe: recipe.clone(),
                relations: vec![(book.id.clone(), RelationshipLabel::PartOf)],
            })
        })
        .collect()
}

/// Two anthologies sharing `S` (one or two books), each with one or two
/// private books. The pair is labeled OVERLAPS in both directions.
pub fn make_overlap_pair(pool: &[&Book], seed: u64) -> Result<(SynthBook, SynthBook)> {
    if pool.len() < 3 {
        return Err(Error::Synth(format!(
            "overlap pairs need a pool of at least 3 books, got {}",
            pool.len()
        )));
    }
    check_distinct(pool)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shared_n = rng.gen_range(1..=2);
    let mut p1_n = rng.gen_range(1..=2);
    let mut p2_n = rng.gen_range(1..=2);
    while shared_n + p1_n + p2_n > pool.len() {
        if shared_n > 1 {
            shared_n -= 1;
        } else if p1_n > 1 {
            p1_n -= 1;
        } else {
            p2_n -= 1;
        }
    }
    let picked: Vec<&Book> = pool
        .choose_multiple(&mut rng, shared_n + p1_n + p2_n)
        .copied()
        .collect();
    // one trim per source, so shared middles are identical in both books
    let trimmed: Vec<Trimmed<'_>> = picked.iter().map(|b| trim_matter(b, &mut rng)).collect();
    let (shared, rest) = trimmed.split_at(shared_n);
    let (private1, private2) = rest.split_at(p1_n);
    let mut build = |private: &[Trimmed<'_>], n: usize| -> Result<SynthBook> {
        let mut parts: Vec<Trimmed<'_>> = private.iter().chain(shared).copied().collect();
        parts.shuffle(&mut rng);
        let donor = rng.gen_range(0..parts.len());
        let mut book = assemble(SynthKind::OverlapPair, seed, n, &parts, donor)?;
        book.relations.clear();
        Ok(book)
    };
    let mut first = build(private1, 0)?;
    let mut second = build(private2, 1)?;
    first
        .relations
        .push((second.book.id.clone(), RelationshipLabel::Overlaps));
    second
        .relations
        .push((first.book.id.clone(), RelationshipLabel::Overlaps));
    Ok((first, second))
}

/// Books strictly shorter than the 40th length percentile, optionally
/// de-duplicated by author and title.
pub fn eligible_shorts(corpus: &[Book], dedup: bool) -> Result<Vec<Book>> {
    let threshold = corpus::length_percentile(corpus, SHORT_BOOK_PERCENTILE)?;
    let shorts: Vec<Book> = corpus
        .iter()
        .filter(|b| b.word_count() < threshold)
        .cloned()
        .collect();
    Ok(if dedup {
        corpus::dedup_by_author_title(&shorts)
    } else {
        shorts
    })
}

/// How many recipes of each kind to run. Overlap recipes yield two books each.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthPlan {
    pub anthology: usize,
    pub combined: usize,
    pub split: usize,
    pub overlap: usize,
}

impl SynthPlan {
    pub fn count(&self, kind: SynthKind) -> usize {
        match kind {
            SynthKind::Anthology => self.anthology,
            SynthKind::Combined => self.combined,
            SynthKind::Split => self.split,
            SynthKind::OverlapPair => self.overlap,
        }
    }
}

/// Output of a batch run: the books, and their training pairs against real
/// sources (plus the synthetic-vs-synthetic OVERLAPS pairs).
#[derive(Debug, Clone, Default)]
pub struct SynthOutput {
    pub books: Vec<SynthBook>,
    pub pairs: Vec<LabeledPair>,
}

/// Per-recipe seeds for one kind: a function of the master seed, the kind and
/// the recipe ordinal only.
pub fn recipe_seeds(master: u64, kind: SynthKind, n: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(master ^ kind.salt().rotate_left(32));
    (0..n).map(|_| rng.gen()).collect()
}

/// Volumes of multi-volume works, grouped by work key and then by volume
/// number. Only single-volume enumerations take part.
fn volume_groups(corpus: &[Book]) -> Vec<Vec<Vec<&Book>>> {
    let mut works: BTreeMap<&str, BTreeMap<u32, Vec<&Book>>> = BTreeMap::new();
    for book in corpus {
        let (Some(key), Some(raw)) = (
            book.metadata.work_key.as_deref(),
            book.metadata.enumeration_raw.as_deref(),
        ) else {
            continue;
        };
        if let Ok(Some(e)) = Enumeration::from_raw(raw) {
            if e.volumes.len() == 1 {
                let v = *e.volumes.iter().next().expect("one volume");
                works.entry(key).or_default().entry(v).or_default().push(book);
            }
        }
    }
    works
        .into_values()
        .filter(|vols| vols.len() >= 2)
        .map(|vols| vols.into_values().collect())
        .collect()
}

/// Run `plan` against `corpus`. Kinds whose input pool is too small are an error.
pub fn generate(corpus: &[Book], plan: &SynthPlan, seed: u64) -> Result<SynthOutput> {
    let mut out = SynthOutput::default();
    let shorts = eligible_shorts(corpus, true)?;
    let short_refs: Vec<&Book> = shorts.iter().collect();

    for recipe_seed in recipe_seeds(seed, SynthKind::Anthology, plan.anthology) {
        let mut rng = ChaCha8Rng::seed_from_u64(recipe_seed ^ 0x9e37_79b9);
        let n = rng
            .gen_range(MIN_COMPONENTS..=MAX_COMPONENTS)
            .min(short_refs.len());
        let components: Vec<&Book> = short_refs.choose_multiple(&mut rng, n).copied().collect();
        out.books.push(make_anthology(&components, recipe_seed)?);
    }

    let works = volume_groups(corpus);
    if plan.combined > 0 && works.is_empty() {
        return Err(Error::Synth(
            "no multi-volume work with at least two single volumes".into(),
        ));
    }
    for recipe_seed in recipe_seeds(seed, SynthKind::Combined, plan.combined) {
        let mut rng = ChaCha8Rng::seed_from_u64(recipe_seed ^ 0x9e37_79b9);
        let vols = &works[rng.gen_range(0..works.len())];
        let k = rng.gen_range(MIN_COMPONENTS..=MAX_COMPONENTS).min(vols.len());
        let start = rng.gen_range(0..=vols.len() - k);
        let picked: Vec<&Book> = vols[start..start + k]
            .iter()
            .map(|copies| copies[rng.gen_range(0..copies.len())])
            .collect();
        out.books.push(make_combined(&picked, recipe_seed)?);
    }

    let threshold = corpus::length_percentile(corpus, SHORT_BOOK_PERCENTILE)?;
    let longs: Vec<&Book> = corpus
        .iter()
        .filter(|b| b.word_count() > threshold && b.pages.len() >= 3)
        .collect();
    if plan.split > 0 && longs.is_empty() {
        return Err(Error::Synth("no book long enough to split".into()));
    }
    for recipe_seed in recipe_seeds(seed, SynthKind::Split, plan.split) {
        let mut rng = ChaCha8Rng::seed_from_u64(recipe_seed ^ 0x9e37_79b9);
        let source = longs[rng.gen_range(0..longs.len())];
        out.books.extend(make_split(source, threshold, recipe_seed)?);
    }

    for recipe_seed in recipe_seeds(seed, SynthKind::OverlapPair, plan.overlap) {
        let (a, b) = make_overlap_pair(&short_refs, recipe_seed)?;
        out.books.push(a);
        out.books.push(b);
    }

    let mut seen = HashSet::new();
    for book in &out.books {
        for pair in book.pairs() {
            if seen.insert((pair.left_id.clone(), pair.right_id.clone())) {
                out.pairs.push(pair);
            }
        }
    }
    Ok(out)
}
