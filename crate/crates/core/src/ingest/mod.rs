//! Documents to retrievable text: extraction, chunking, and an in-memory
//! per-document vector index over the chunks.

mod chunk;
mod extract;
mod index;
mod pdf;

pub use chunk::{chunk_text, Chunk, ChunkParams};
pub use extract::{extract_text, DocKind, ExtractedText, RawDocument};
pub use index::{build_index, build_index_with, ChunkCache, ChunkIndex, IndexEntry};
pub use pdf::{MinimalPdfExtractor, PdfText, PdfTextExtractor};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("unsupported document kind {0:?}")]
    UnsupportedKind(String),
    #[error("corrupt document {doc_id:?}: {reason}")]
    CorruptDocument { doc_id: String, reason: String },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("embedder failure: {0}")]
    EmbedderFailure(String),
    #[error("index is empty")]
    EmptyIndex,
    #[error("io failure: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = IngestError> = std::result::Result<T, E>;
