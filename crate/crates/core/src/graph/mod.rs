//! Typed property graph of Fact and Dimension nodes.
//!
//! [`Graph`] is the in-memory structure; [`GraphStore`] wraps it with an
//! append-only operation log on disk and copy-on-write snapshots for
//! concurrent readers.

mod export;
mod filter;
mod schema;
mod store;
mod types;

pub use export::{export_csv, export_jsonl, import_jsonl, ExportFormat};
pub use filter::Predicate;
pub use schema::{GraphSchema, LabelSchema, PropertySpec};
pub use store::{Graph, GraphStore, Op};
pub use types::{
    DimensionNode, Direction, Edge, EdgeKind, FactNode, Node, NodeId, NodeRole, PropertyMap,
    PropertyValue, ValueType,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("schema violation on label {label:?}: {reason}")]
    SchemaViolation { label: String, reason: String },
    #[error("unknown owner {0}")]
    UnknownOwner(NodeId),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("{0}")]
    KindViolation(String),
    #[error("io failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt graph data: {0}")]
    Corrupt(String),
}

impl GraphError {
    pub(crate) fn schema(label: &str, reason: impl Into<String>) -> Self {
        GraphError::SchemaViolation {
            label: label.to_string(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = GraphError> = std::result::Result<T, E>;
