//! Append-only store of driving experiences with exact cosine retrieval.

mod embed;
mod store;

use thiserror::Error;

pub use embed::{cosine, Embedder, HashEmbedder, WireEmbedder, WireEmbedderConfig, DEFAULT_DIMENSION};
pub use store::{
    bundled_exemplars, seed_memory, Exemplar, MemoryRecord, NewRecord, Outcome, VectorStore, SCHEMA_VERSION,
};

#[derive(Debug, Error)]
pub enum MemoryError {
    #[error("text contains no tokens")]
    EmptyText,
    #[error("embedding backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("expected dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("embedding has zero or non-finite norm")]
    InvalidEmbedding,
    #[error("store was built with embedder {store:?}, query uses {query:?}")]
    EmbedderMismatch { store: String, query: String },
    #[error("corrupt store: {0}")]
    CorruptStore(String),
    #[error("unsupported schema version {found} (expected {expected})")]
    SchemaVersionMismatch { found: u64, expected: u64 },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
