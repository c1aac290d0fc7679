//! Aligned cross-lingual word vectors, bilingual lexicons and
//! subword-to-word aggregation.

mod lexicon;
pub mod subword;
mod table;

pub use lexicon::BilingualLexicon;
pub use subword::{aggregate_sum, ChunkSplitter, SubwordSpan, SubwordSplitter, TransformerAggregator};
pub use table::{EmbeddingTable, OovPolicy};
