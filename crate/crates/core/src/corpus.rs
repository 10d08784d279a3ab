//! Page-level token-count books, their JSON file format, and the corpus
//! statistics the synthetic generator relies on.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::tsv;

/// One scanned page, stored as lowercase token counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Page {
    pub index: usize,
    pub tokens: BTreeMap<String, u32>,
    pub word_count: u64,
}

impl Page {
    /// Build a page, lowercasing tokens and merging counts of tokens that only
    /// differ in case. Zero counts are dropped.
    pub fn new(index: usize, tokens: impl IntoIterator<Item = (String, u32)>) -> Self {
        let mut merged: BTreeMap<String, u32> = BTreeMap::new();
        for (tok, n) in tokens {
            if n > 0 {
                *merged.entry(tok.to_lowercase()).or_insert(0) += n;
            }
        }
        let word_count = merged.values().map(|&n| u64::from(n)).sum();
        Page {
            index,
            tokens: merged,
            word_count,
        }
    }

    /// Same content, ignoring the page's position in its book.
    pub fn same_content(&self, other: &Page) -> bool {
        self.tokens == other.tokens
    }

    pub(crate) fn reindexed(&self, index: usize) -> Page {
        Page {
            index,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BookMetadata {
    pub title: String,
    pub author: String,
    pub enumeration_raw: Option<String>,
    /// Groups manifestations and volumes of one work. Never empty when present.
    pub work_key: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Book {
    pub id: String,
    pub pages: Vec<Page>,
    pub metadata: BookMetadata,
}

impl Book {
    /// Build a book, re-indexing pages to their order in `pages`.
    pub fn new(id: impl Into<String>, pages: Vec<Page>, metadata: BookMetadata) -> Result<Self> {
        let id = id.into();
        if pages.is_empty() {
            return Err(Error::InvalidBook {
                id,
                message: "a book needs at least one page".into(),
            });
        }
        if metadata.work_key.as_deref() == Some("") {
            return Err(Error::InvalidBook {
                id,
                message: "work_key must not be empty".into(),
            });
        }
        let pages = pages
            .iter()
            .enumerate()
            .map(|(i, p)| if p.index == i { p.clone() } else { p.reindexed(i) })
            .collect();
        Ok(Book {
            id,
            pages,
            metadata,
        })
    }

    pub fn word_count(&self) -> u64 {
        book_word_count(self)
    }

    pub fn to_json(&self) -> Value {
        let pages: Vec<Value> = self
            .pages
            .iter()
            .map(|p| json!({ "tokens": p.tokens }))
            .collect();
        json!({
            "id": self.id,
            "metadata": {
                "title": self.metadata.title,
                "author": self.metadata.author,
                "enumeration": self.metadata.enumeration_raw,
                "work_key": self.metadata.work_key,
            },
            "pages": pages,
        })
    }

    /// Parse the book JSON format. `path` is only used in error messages.
    pub fn from_json(value: &Value, path: &Path) -> Result<Self> {
        let fail = |message: String| Error::BookFormat {
            path: path.to_path_buf(),
            message,
        };
        let obj = value
            .as_object()
            .ok_or_else(|| fail("top level is not an object".into()))?;
        let id = obj
            .get("id")
            .and_then(Value::as_str)
            .ok_or_else(|| fail("missing string field \"id\"".into()))?;
        let metadata = match obj.get("metadata") {
            None | Some(Value::Null) => BookMetadata::default(),
            Some(Value::Object(m)) => parse_metadata(m).map_err(fail)?,
            Some(_) => return Err(fail("\"metadata\" is not an object".into())),
        };
        let raw_pages = obj
            .get("pages")
            .and_then(Value::as_array)
            .ok_or_else(|| fail("missing array field \"pages\"".into()))?;
        if raw_pages.is_empty() {
            return Err(Error::InvalidBook {
                id: id.to_string(),
                message: "page list is empty".into(),
            });
        }
        let mut pages = Vec::with_capacity(raw_pages.len());
        for (i, raw) in raw_pages.iter().enumerate() {
            pages.push(parse_page(i, raw).map_err(|message| Error::PageFormat {
                path: path.to_path_buf(),
                page: i,
                message,
            })?);
        }
        Book::new(id, pages, metadata)
    }
}

fn optional_string(m: &Map<String, Value>, key: &str) -> std::result::Result<Option<String>, String> {
    match m.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) if s.trim().is_empty() => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(_) => Err(format!("metadata field {key:?} is not a string")),
    }
}

fn parse_metadata(m: &Map<String, Value>) -> std::result::Result<BookMetadata, String> {
    Ok(BookMetadata {
        title: optional_string(m, "title")?.unwrap_or_default(),
        author: optional_string(m, "author")?.unwrap_or_default(),
        enumeration_raw: optional_string(m, "enumeration")?,
        work_key: optional_string(m, "work_key")?,
    })
}

fn parse_page(index: usize, raw: &Value) -> std::result::Result<Page, String> {
    let tokens = raw
        .get("tokens")
        .and_then(Value::as_object)
        .ok_or("missing object field \"tokens\"")?;
    let mut counts = Vec::with_capacity(tokens.len());
    for (tok, n) in tokens {
        let n = n
            .as_u64()
            .ok_or_else(|| format!("count for {tok:?} is not a non-negative integer"))?;
        if n == 0 {
            return Err(format!("count for {tok:?} is zero"));
        }
        let n = u32::try_from(n).map_err(|_| format!("count for {tok:?} is too large"))?;
        counts.push((tok.clone(), n));
    }
    Ok(Page::new(index, counts))
}

pub fn load_book(path: &Path) -> Result<Book> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| Error::BookFormat {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Book::from_json(&value, path)
}

pub fn save_book(book: &Book, path: &Path) -> Result<()> {
    let text = serde_json::to_string(&book.to_json())?;
    tsv::write(path, &text)
}

pub fn book_word_count(book: &Book) -> u64 {
    book.pages.iter().map(|p| p.word_count).sum()
}

/// Nearest-rank percentile of book word counts: the smallest count `w` such
/// that at least `q * N` books have at most `w` words.
pub fn length_percentile(corpus: &[Book], q: f64) -> Result<u64> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Config(format!("percentile {q} outside [0, 1]")));
    }
    let mut counts: Vec<u64> = corpus.iter().map(book_word_count).collect();
    counts.sort_unstable();
    let n = counts.len();
    // the small slack keeps products like 0.4 * 5 from rounding up a rank
    let rank = ((q * n as f64) - 1e-9).ceil().max(1.0) as usize;
    Ok(counts[rank.min(n) - 1])
}

fn normalize_key(s: &str) -> String {
    s.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Keep one book per normalized (author, title); the lexicographically smallest
/// id wins. Survivors keep their corpus order.
pub fn dedup_by_author_title(corpus: &[Book]) -> Vec<Book> {
    let mut keeper: HashMap<(String, String), &str> = HashMap::new();
    for book in corpus {
        let key = (
            normalize_key(&book.metadata.author),
            normalize_key(&book.metadata.title),
        );
        keeper
            .entry(key)
            .and_modify(|id| {
                if book.id.as_str() < *id {
                    *id = book.id.as_str();
                }
            })
            .or_insert(book.id.as_str());
    }
    let mut seen = std::collections::HashSet::new();
    corpus
        .iter()
        .filter(|b| {
            let key = (normalize_key(&b.metadata.author), normalize_key(&b.metadata.title));
            keeper[&key] == b.id && seen.insert(b.id.clone())
        })
        .cloned()
        .collect()
}

/// One row of `manifest.tsv`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub id: String,
    pub path: PathBuf,
    pub word_count: u64,
}

pub fn render_manifest(entries: &[ManifestEntry]) -> String {
    tsv::render(
        &["id", "path", "word_count"],
        entries.iter().map(|e| {
            vec![
                e.id.clone(),
                e.path.to_string_lossy().into_owned(),
                e.word_count.to_string(),
            ]
        }),
    )
}

/// Read a manifest. Relative book paths are resolved against the manifest's
/// directory.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let table = tsv::read(path)?;
    let col = |name: &str| {
        table.column(name).ok_or_else(|| Error::Tsv {
            path: path.to_path_buf(),
            line: 1,
            message: format!("missing column {name:?}"),
        })
    };
    let (id, p, wc) = (col("id")?, col("path")?, col("word_count")?);
    let base = path.parent().unwrap_or(Path::new(""));
    table
        .rows
        .iter()
        .map(|(line, row)| {
            let word_count = row[wc].trim().parse().map_err(|_| Error::Tsv {
                path: path.to_path_buf(),
                line: *line,
                message: format!("bad word_count {:?}", row[wc]),
            })?;
            let book_path = PathBuf::from(&row[p]);
            let book_path = if book_path.is_absolute() {
                book_path
            } else {
                base.join(book_path)
            };
            Ok(ManifestEntry {
                id: row[id].clone(),
                path: book_path,
                word_count,
            })
        })
        .collect()
}

pub fn load_corpus(manifest: &Path) -> Result<Vec<Book>> {
    read_manifest(manifest)?
        .iter()
        .map(|e| load_book(&e.path))
        .collect()
}

/// All `*.json` files directly under `dir`, sorted by file name.
pub fn book_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    Ok(files)
}
