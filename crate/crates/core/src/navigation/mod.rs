//! Linking Fact nodes through extracted references: title resolution
//! against a document repository and budgeted breadth-first expansion.

#[cfg(feature = "http")]
mod arxiv;
mod expand;
mod repo;
mod resolve;

#[cfg(feature = "http")]
pub use arxiv::ArxivRepository;
pub use expand::{ExpandStats, ExpansionBudget, FailedDocument, GraphDelta, Navigator};
pub use repo::{FixtureRepository, ManifestEntry, RepoEntry, Repository};
pub use resolve::{resolve_reference, similarity, RepositoryHit, DEFAULT_THRESHOLD};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GraphError, NodeId};
use crate::inspection::InspectionError;
use crate::text::normalize_title;

#[derive(Debug, Error)]
pub enum NavigationError {
    #[error("title is empty after normalization")]
    EmptyTitle,
    #[error("repository unavailable: {0}")]
    RepositoryUnavailable(String),
    #[error("document {repo_doc_id:?} could not be fetched: {reason}")]
    DocumentFailure { repo_doc_id: String, reason: String },
    #[error("repository configuration: {0}")]
    Config(String),
    #[error("seed {0} is not a fact in the graph")]
    UnknownSeed(NodeId),
    #[error(transparent)]
    Inspection(#[from] InspectionError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

pub type Result<T, E = NavigationError> = std::result::Result<T, E>;

/// Stable Fact id of a titled document: the hash of its normalized title.
pub fn canonical_id(title: &str) -> Result<NodeId> {
    let normalized = normalize_title(title);
    if normalized.is_empty() {
        return Err(NavigationError::EmptyTitle);
    }
    Ok(NodeId::from_key(normalized.as_bytes()))
}

/// One extracted reference.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceRecord {
    pub raw: String,
    pub normalized_title: String,
    pub source_fact: NodeId,
}

impl ReferenceRecord {
    pub fn new(raw: &str, source_fact: NodeId) -> Result<Self> {
        let normalized_title = normalize_title(raw);
        if normalized_title.is_empty() {
            return Err(NavigationError::EmptyTitle);
        }
        Ok(ReferenceRecord {
            raw: raw.to_string(),
            normalized_title,
            source_fact,
        })
    }
}
