//! The Inspection DAG: parse a workflow, run its subnodes over one document
//! in dependency order, and turn the outputs into a Fact node plus
//! Dimension nodes.

mod rule;
mod run;
mod schema;
mod workflow;

pub use rule::{rule_extract, section_body, section_items, RuleError, RuleSpec};
pub use run::{inspect_batch, materialize, run_inspection, InspectionOutput, Materialized, NodeStatus, Services};
pub use schema::{validate_output, OutputKind, OutputSchema, TypedOutput, ValidationError};
pub use workflow::{
    parse_workflow, Extractor, FactSpec, InspectNodeSpec, ModelRef, NavigationSpec, WorkflowSpec,
    DEFAULT_RETRIEVAL_K, TITLE_FIELD,
};

use thiserror::Error;

use crate::graph::GraphError;

#[derive(Debug, Error)]
pub enum InspectionError {
    #[error("malformed workflow config: {0}")]
    MalformedConfig(String),
    #[error("duplicate subnode name {0:?}")]
    DuplicateNodeName(String),
    #[error("edge names unknown subnode {0:?}")]
    UnknownEdgeEndpoint(String),
    #[error("workflow has a cycle through {0:?}")]
    CycleDetected(Vec<String>),
    #[error("document {doc_id:?} is unreadable: {reason}")]
    DocumentUnreadable { doc_id: String, reason: String },
    #[error("document {0:?} produced no title")]
    MissingTitle(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

pub type Result<T, E = InspectionError> = std::result::Result<T, E>;
