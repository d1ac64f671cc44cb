//! Offline scraping: inspect seed documents, then expand along their
//! references.

use std::path::Path;

use graphy_core::graph::{GraphStore, NodeId};
use graphy_core::ingest::RawDocument;
use graphy_core::inspection::{materialize, run_inspection, InspectionError};
use graphy_core::navigation::{
    resolve_reference, ExpansionBudget, FailedDocument, Navigator, NavigationError, ReferenceRecord, DEFAULT_THRESHOLD,
};
use serde::Serialize;
use thiserror::Error;

use crate::app::App;

#[derive(Debug, Error)]
pub enum ScrapeError {
    #[error("seed {seed:?}: {source}")]
    Ingest {
        seed: String,
        source: graphy_core::ingest::IngestError,
    },
    #[error("seed {seed:?}: {source}")]
    Inspection { seed: String, source: InspectionError },
    #[error("expansion: {0}")]
    Navigation(#[from] NavigationError),
}

/// Counts printed by `graphy scrape`. The expansion fields describe only
/// what expansion added on top of the seeds.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ScrapeSummary {
    pub seeds: usize,
    pub seed_dimensions: usize,
    /// Title seeds no repository entry matched.
    pub unresolved_seeds: Vec<String>,
    pub facts: usize,
    pub dimensions: usize,
    pub edges: usize,
    pub dropped_refs: usize,
    pub budget_skipped: usize,
    pub failed_documents: Vec<FailedDocument>,
}

impl std::fmt::Display for ScrapeSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "seeds: {} ({} dimensions)", self.seeds, self.seed_dimensions)?;
        writeln!(f, "facts: {}", self.facts)?;
        writeln!(f, "dimensions: {}", self.dimensions)?;
        writeln!(f, "edges: {}", self.edges)?;
        writeln!(f, "dropped refs: {}", self.dropped_refs)?;
        write!(f, "budget skipped: {}", self.budget_skipped)?;
        for seed in &self.unresolved_seeds {
            write!(f, "\nunresolved seed: {seed}")?;
        }
        for failed in &self.failed_documents {
            write!(f, "\nfailed: {} ({})", failed.repo_doc_id, failed.reason)?;
        }
        Ok(())
    }
}

/// A seed is a document path when such a file exists, otherwise a title
/// looked up in the repository.
fn load_seed(app: &App, seed: &str) -> Result<Option<RawDocument>, ScrapeError> {
    let path = Path::new(seed);
    if path.is_file() {
        return RawDocument::from_path(path).map(Some).map_err(|source| ScrapeError::Ingest {
            seed: seed.to_string(),
            source,
        });
    }
    let Ok(reference) = ReferenceRecord::new(seed, NodeId::from_key(b"seed")) else {
        return Ok(None);
    };
    match resolve_reference(&reference, app.repository.as_ref(), DEFAULT_THRESHOLD)? {
        Some(hit) => Ok(Some(app.repository.fetch(&hit.entry.repo_doc_id)?)),
        None => Ok(None),
    }
}

pub fn scrape(app: &App, store: &mut GraphStore, seeds: &[String], budget: ExpansionBudget) -> Result<ScrapeSummary, ScrapeError> {
    let spec = &app.config.workflow;
    let mut summary = ScrapeSummary::default();
    let mut facts = Vec::new();
    for seed in seeds {
        let Some(doc) = load_seed(app, seed)? else {
            tracing::warn!(seed, "seed title not found in repository");
            summary.unresolved_seeds.push(seed.clone());
            continue;
        };
        let inspection = |source| ScrapeError::Inspection {
            seed: seed.clone(),
            source,
        };
        let out = run_inspection(&doc, spec, &app.services).map_err(inspection)?;
        let written = materialize(store, spec, &out).map_err(inspection)?;
        summary.seeds += 1;
        summary.seed_dimensions += written.dimensions.len();
        facts.push(written.fact);
    }
    if facts.is_empty() {
        return Ok(summary);
    }

    let delta = Navigator::new(spec, app.repository.as_ref(), &app.services)
        .with_exec(app.exec)
        .expand(store, &facts, budget)?;
    summary.facts = delta.new_facts.len();
    summary.dimensions = delta.new_dimensions.len();
    summary.edges = delta.new_links.len();
    summary.dropped_refs = delta.stats.references_dropped;
    summary.budget_skipped = delta.stats.budget_skipped;
    summary.failed_documents = delta.stats.failed_documents;
    Ok(summary)
}
