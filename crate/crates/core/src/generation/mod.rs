//! Report generation: interpret an instruction into the attributes and
//! dimensions to use, collect them for the selected facts, organize the
//! facts into a mind map batch by batch, and write a cited report rendered
//! as Markdown or LaTeX.

mod intent;
mod job;
mod mindmap;
mod model;
mod payload;
mod render;
mod report;

pub use intent::{interpret_intent, keyword_intent, IntentEdit, IntentProposal, ReportIntent, ReportKind, Vocabulary};
pub use job::{JobStage, ReportJob};
pub use mindmap::{build_mindmap, Category, Member, MindMap, MISC_CATEGORY};
pub use model::{CategorizeContext, GenerationModel, LlmModel, OfflineModel, Placement, SectionKind, SectionRequest};
pub use payload::{
    collect_payload, default_batch_size, Citation, DimensionItem, PayloadRow, PayloadTable, CONTEXT_BUDGET_CHARS,
};
pub use render::{render_report, ReportFormat};
pub use report::{cite_marker, parse_segments, write_report, BibEntry, ReportDraft, Section, Segment};

use thiserror::Error;

use crate::graph::NodeId;
use crate::providers::ProviderError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenerationError {
    #[error("instruction is empty")]
    EmptyInstruction,
    #[error("no usable dimension could be inferred from the instruction")]
    NoUsableIntent,
    #[error("unknown attribute {0:?}")]
    UnknownAttribute(String),
    #[error("at least one attribute is required")]
    NoAttributes,
    #[error("unknown dimension {0:?}")]
    UnknownDimension(String),
    #[error("no facts selected")]
    EmptySelection,
    #[error("unknown fact {0}")]
    UnknownFact(NodeId),
    #[error("batch size must be at least 1")]
    InvalidBatchSize,
    #[error("mind map has no categories")]
    EmptyMindMap,
    #[error("invalid mind map: {0}")]
    InvalidMindMap(String),
    #[error("provider failure: {0}")]
    ProviderFailure(String),
    #[error("unsupported format {0:?}")]
    UnsupportedFormat(String),
    #[error("job is at stage {actual}, expected {expected}")]
    InvalidStage { expected: String, actual: String },
}

impl From<ProviderError> for GenerationError {
    fn from(e: ProviderError) -> Self {
        GenerationError::ProviderFailure(e.to_string())
    }
}

pub type Result<T, E = GenerationError> = std::result::Result<T, E>;
