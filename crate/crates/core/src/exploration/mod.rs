//! Canvas-based exploration: search, histograms, neighbor pre-query,
//! refinement and promotion, all expressed as one query IR.

mod histogram;
mod ir;
mod refine;
mod session;

pub use histogram::{
    attribute_histogram, filter_by_bucket, population_digest, BucketKey, Histogram, HistogramBucket, REAL_BINS,
    SAMPLE_IDS,
};
pub use ir::{sort_nodes, Aggregate, EdgePattern, Filter, QueryIR, QueryOutput, Sort};
pub use refine::{default_attribute, RefineSpec, RefinerView, SortDirection, TableRow, TABLE_PREVIEW_ROWS};
pub use session::{Action, ActionOutcome, HistoryEntry, Population, Session, DEFAULT_SEARCH_LIMIT};

use thiserror::Error;

use crate::graph::NodeId;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExplorationError {
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("label {label:?} has no attribute {attribute:?}")]
    UnknownAttribute { label: String, attribute: String },
    #[error("stale bucket: {0}")]
    StaleBucket(String),
    #[error("selection is empty")]
    EmptySelection,
    #[error("{} selected node(s) are not in the present canvas", .0.len())]
    NotInPresent(Vec<NodeId>),
    #[error("{} chosen node(s) are not in the future canvas or the search results", .0.len())]
    NotInFuture(Vec<NodeId>),
    #[error("no neighbor view; run a pre-query first")]
    NoView,
    #[error("invalid query: {0}")]
    InvalidIR(String),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
}

pub type Result<T, E = ExplorationError> = std::result::Result<T, E>;
