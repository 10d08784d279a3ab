//! Chunk-by-chunk cosine similarity matrices and the centroid/difference pair
//! features.
//!
//! Matrix files are a 16-byte header (`SIMM`, side, left chunks, right chunks as
//! little-endian `u32`) followed by `side * side` little-endian `f32` values in
//! row-major order.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Matrix side for the short demo books.
pub const DEFAULT_MATRIX_SIZE: usize = 32;
/// Matrix side for full-length books chunked at 5000 words.
pub const FULL_BOOK_MATRIX_SIZE: usize = 150;
const MAGIC: &[u8; 4] = b"SIMM";
const HEADER_LEN: usize = 16;

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            actual: v.len(),
        });
    }
    Ok(cosine_unchecked(u, v))
}

fn cosine_unchecked(u: &[f64], v: &[f64]) -> f64 {
    let (mut dot, mut nu, mut nv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return 0.0;
    }
    (dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0)
}

/// Row-major dense matrix of unpadded similarities.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                data.push(self.get(i, j));
            }
        }
        DenseMatrix {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }
}

/// `M[i][j] = cosine(left[i], right[j])`; rows follow the left book's chunks.
pub fn pairwise_similarity<L, R>(left: &[L], right: &[R]) -> Result<DenseMatrix>
where
    L: AsRef<[f64]>,
    R: AsRef<[f64]>,
{
    let dim = left
        .first()
        .map(|v| v.as_ref().len())
        .or_else(|| right.first().map(|v| v.as_ref().len()))
        .unwrap_or(0);
    for v in left.iter().map(AsRef::as_ref).chain(right.iter().map(AsRef::as_ref)) {
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: v.len(),
            });
        }
    }
    // Normalize once; zero vectors stay zero and give cosine 0.
    let unit = |v: &[f64]| -> Vec<f64> {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n == 0.0 {
            vec![0.0; v.len()]
        } else {
            v.iter().map(|x| x / n).collect()
        }
    };
    let lu: Vec<Vec<f64>> = left.iter().map(|v| unit(v.as_ref())).collect();
    let ru: Vec<Vec<f64>> = right.iter().map(|v| unit(v.as_ref())).collect();
    let mut data = Vec::with_capacity(lu.len() * ru.len());
    for l in &lu {
        for r in &ru {
            let dot: f64 = l.iter().zip(r).map(|(a, b)| a * b).sum();
            data.push(dot.clamp(-1.0, 1.0));
        }
    }
    Ok(DenseMatrix {
        rows: lu.len(),
        cols: ru.len(),
        data,
    })
}

/// Fixed-size, top-left anchored similarity matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub size: usize,
    pub left_chunks: usize,
    pub right_chunks: usize,
    pub values: Vec<f32>,
}

impl SimilarityMatrix {
    pub fn get(&self, i: usize, j: usize) -> f32 {
        self.values[i * self.size + j]
    }

    /// Rows and columns that hold real (unpadded) values.
    pub fn live_shape(&self) -> (usize, usize) {
        (self.left_chunks.min(self.size), self.right_chunks.min(self.size))
    }

    pub fn live_block(&self) -> DenseMatrix {
        let (rows, cols) = self.live_shape();
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f64::from(self.get(i, j)));
            }
        }
        DenseMatrix { rows, cols, data }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.values.len());
        out.extend_from_slice(MAGIC);
        for n in [self.size, self.left_chunks, self.right_chunks] {
            out.extend_from_slice(&(n as u32).to_le_bytes());
        }
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let fail = |message: &str| Error::MatrixFormat {
            path: path.to_path_buf(),
            message: message.into(),
        };
        if bytes.len() < HEADER_LEN {
            return Err(fail("file shorter than header"));
        }
        if &bytes[..4] != MAGIC {
            return Err(fail("bad magic"));
        }
        let word = |i: usize| {
            u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().expect("4 bytes")) as usize
        };
        let (size, left_chunks, right_chunks) = (word(0), word(1), word(2));
        if size == 0 {
            return Err(fail("zero matrix size"));
        }
        let expected = size
            .checked_mul(size)
            .and_then(|n| n.checked_mul(4))
            .and_then(|n| n.checked_add(HEADER_LEN))
            .ok_or_else(|| fail("matrix size overflows"))?;
        if bytes.len() != expected {
            return Err(fail("payload length does not match the header"));
        }
        let values: Vec<f32> = bytes[HEADER_LEN..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(fail("non-finite value"));
        }
        Ok(SimilarityMatrix {
            size,
            left_chunks,
            right_chunks,
            values,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }
}

/// Zero-pad or truncate to `side x side`, keeping the first rows and columns.
pub fn pad_truncate(m: &DenseMatrix, side: usize) -> Result<SimilarityMatrix> {
    if side == 0 {
        return Err(Error::Config("matrix size must be at least 1".into()));
    }
    let mut values = vec![0.0f32; side * side];
    for i in 0..m.rows.min(side) {
        for j in 0..m.cols.min(side) {
            values[i * side + j] = m.get(i, j) as f32;
        }
    }
    Ok(SimilarityMatrix {
        size: side,
        left_chunks: m.rows,
        right_chunks: m.cols,
        values,
    })
}

/// Centroid of the two book vectors followed by `left - right`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairFeatures {
    pub vector: Vec<f64>,
    pub d: usize,
}

impl PairFeatures {
    pub fn centroid(&self) -> &[f64] {
        &self.vector[..self.d]
    }

    pub fn difference(&self) -> &[f64] {
        &self.vector[self.d..]
    }
}

pub fn pair_features(left: &[f64], right: &[f64]) -> Result<PairFeatures> {
    if left.len() != right.len() {
        return Err(Error::DimensionMismatch {
            expected: left.len(),
            actual: right.len(),
        });
    }
    let d = left.len();
    let mut vector = Vec::with_capacity(2 * d);
    vector.extend(left.iter().zip(right).map(|(l, r)| (l + r) / 2.0));
    vector.extend(left.iter().zip(right).map(|(l, r)| l - r));
    Ok(PairFeatures { vector, d })
}
