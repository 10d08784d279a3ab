//! Word-vector table, page-granular chunking, and summed chunk/book vectors.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use log::warn;

use crate::corpus::Book;
use crate::error::{Error, Result};

pub const DEFAULT_CHUNK_SIZE: u64 = 5000;

/// Pretrained word vectors keyed by lowercase surface form.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dimension: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        Ok(Self {
            dimension,
            vectors: HashMap::new(),
        })
    }

    /// Insert or replace a word vector. Returns true when an entry was replaced.
    pub fn insert(&mut self, word: &str, vector: Vec<f64>) -> Result<bool> {
        if vector.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                actual: vector.len(),
            });
        }
        Ok(self.vectors.insert(word.to_lowercase(), vector).is_some())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(word).map(Vec::as_slice)
    }

    /// Parse the plain-text format: `word f1 f2 ... fd` per line, no header.
    pub fn parse(text: &str) -> Result<Self> {
        let mut table: Option<EmbeddingTable> = None;
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let mut fields = line.split_whitespace();
            let Some(word) = fields.next() else { continue };
            let vector = fields
                .map(|f| {
                    f.parse::<f64>().map_err(|_| Error::EmbeddingFormat {
                        line: line_no,
                        message: format!("bad number {f:?}"),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            if vector.iter().any(|x| !x.is_finite()) {
                return Err(Error::EmbeddingFormat {
                    line: line_no,
                    message: "non-finite value".into(),
                });
            }
            if table.is_none() {
                table = Some(EmbeddingTable::new(vector.len()).map_err(|_| {
                    Error::EmbeddingFormat {
                        line: line_no,
                        message: "entry has no values".into(),
                    }
                })?);
            }
            let table = table.as_mut().expect("initialized above");
            if vector.len() != table.dimension {
                return Err(Error::EmbeddingFormat {
                    line: line_no,
                    message: format!(
                        "expected {} values, found {}",
                        table.dimension,
                        vector.len()
                    ),
                });
            }
            if table.insert(word, vector)? {
                warn!("embedding line {line_no}: duplicate word {word:?}, keeping the last entry");
            }
        }
        table.ok_or(Error::EmbeddingFormat {
            line: 0,
            message: "file has no entries".into(),
        })
    }

    /// Render in the text format, words sorted for reproducible output.
    pub fn render(&self) -> String {
        let words: BTreeMap<&String, &Vec<f64>> = self.vectors.iter().collect();
        let mut out = String::new();
        for (word, v) in words {
            out.push_str(word);
            for x in v {
                out.push(' ');
                out.push_str(&x.to_string());
            }
            out.push('\n');
        }
        out
    }
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingTable> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    EmbeddingTable::parse(&text)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chunk {
    pub ordinal: usize,
    pub tokens: BTreeMap<String, u64>,
    pub word_count: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChunkVector {
    pub ordinal: usize,
    pub vector: Vec<f64>,
    pub words_embedded: u64,
}

/// Accumulate whole pages into chunks of at least `chunk_size` words.
///
/// A chunk closes as soon as it reaches `chunk_size`, so every chunk but the
/// last holds at least that many words. Pages are never split and the trailing
/// partial chunk is kept when it has any words.
pub fn chunk_book(book: &Book, chunk_size: u64) -> Result<Vec<Chunk>> {
    if chunk_size == 0 {
        return Err(Error::Config("chunk size must be at least 1".into()));
    }
    let mut chunks = Vec::new();
    let mut current = Chunk {
        ordinal: 0,
        tokens: BTreeMap::new(),
        word_count: 0,
    };
    for page in &book.pages {
        for (tok, &n) in &page.tokens {
            *current.tokens.entry(tok.clone()).or_insert(0) += u64::from(n);
        }
        current.word_count += page.word_count;
        if current.word_count >= chunk_size {
            let ordinal = chunks.len() + 1;
            chunks.push(std::mem::replace(
                &mut current,
                Chunk {
                    ordinal,
                    tokens: BTreeMap::new(),
                    word_count: 0,
                },
            ));
        }
    }
    if current.word_count > 0 {
        chunks.push(current);
    }
    Ok(chunks)
}

/// Count-weighted sum of the chunk's word vectors. Out-of-vocabulary tokens
/// are skipped.
pub fn chunk_vector(chunk: &Chunk, table: &EmbeddingTable) -> ChunkVector {
    let mut vector = vec![0.0; table.dimension()];
    let mut words_embedded = 0;
    for (tok, &n) in &chunk.tokens {
        if let Some(v) = table.get(tok) {
            let w = n as f64;
            for (acc, x) in vector.iter_mut().zip(v) {
                *acc += w * x;
            }
            words_embedded += n;
        }
    }
    ChunkVector {
        ordinal: chunk.ordinal,
        vector,
        words_embedded,
    }
}

pub fn chunk_vectors(book: &Book, table: &EmbeddingTable, chunk_size: u64) -> Result<Vec<ChunkVector>> {
    Ok(chunk_book(book, chunk_size)?
        .iter()
        .map(|c| chunk_vector(c, table))
        .collect())
}

/// Sum of chunk vectors, in chunk order.
pub fn sum_vectors(chunks: &[ChunkVector], dimension: usize) -> Vec<f64> {
    let mut out = vec![0.0; dimension];
    for c in chunks {
        for (acc, x) in out.iter_mut().zip(&c.vector) {
            *acc += x;
        }
    }
    out
}

/// Book-level vector: the sum of the book's chunk vectors at the default chunk size.
pub fn book_vector(book: &Book, table: &EmbeddingTable) -> Vec<f64> {
    let chunks = chunk_vectors(book, table, DEFAULT_CHUNK_SIZE).expect("default chunk size is positive");
    sum_vectors(&chunks, table.dimension())
}
