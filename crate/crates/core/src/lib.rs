//! Relationship classification between scanned books.
//!
//! Books are sequences of pages of token counts. Pairs of books are turned into
//! a chunk-by-chunk cosine similarity matrix plus a centroid/difference feature
//! vector, and a small two-branch convolutional network labels the pair as
//! same-work, different-volume, whole-part (`CONTAINS` / `PARTOF`), overlapping
//! or unrelated.
//!
//! Whole-part pairs are rare in library catalogs, so the [`synth`] module remixes
//! real books into artificial anthologies, combined volumes, split volumes and
//! overlapping anthology pairs that are used as extra training data. The
//! [`eval`] module runs the comparison between training with and without those
//! artificial books.

pub mod corpus;
pub mod embed;
pub mod enumparse;
pub mod error;
pub mod eval;
pub mod nn;
pub mod simmat;
pub mod synth;
pub mod tsv;
mod types;

pub use corpus::{Book, BookMetadata, Page};
pub use embed::{Chunk, ChunkVector, EmbeddingTable};
pub use enumparse::{Enumeration, GroundTruthRelation};
pub use error::{Error, Result};
pub use nn::{ClassifierModel, ModelConfig, TrainConfig};
pub use simmat::{PairFeatures, SimilarityMatrix};
pub use synth::{SynthBook, SynthKind, SynthRecipe};
pub use types::{LabeledPair, PairExample, Provenance, RelationshipLabel};
