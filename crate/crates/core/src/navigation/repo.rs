use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{NavigationError, Result};
use crate::ingest::{DocKind, RawDocument};
use crate::text::normalize_title;

/// Repository metadata for one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepoEntry {
    pub repo_doc_id: String,
    pub title: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, Value>,
}

impl RepoEntry {
    pub fn new(repo_doc_id: &str, title: &str) -> Self {
        RepoEntry {
            repo_doc_id: repo_doc_id.to_string(),
            title: title.to_string(),
            metadata: BTreeMap::new(),
        }
    }
}

/// A searchable source of documents.
pub trait Repository: Send + Sync {
    fn id(&self) -> &str;

    /// Candidate entries for a normalized title. May over-return; the
    /// resolver does the final matching.
    fn search(&self, normalized_title: &str) -> Result<Vec<RepoEntry>>;

    fn fetch(&self, repo_doc_id: &str) -> Result<RawDocument>;
}

/// One line of a fixture manifest: `{"repo_doc_id", "title", "file"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub repo_doc_id: String,
    pub title: String,
    pub file: PathBuf,
    #[serde(default)]
    pub metadata: BTreeMap<String, Value>,
}

#[derive(Debug, Clone)]
enum Source {
    File(PathBuf),
    Document(RawDocument),
    Missing,
}

/// Directory of documents described by a titles manifest.
#[derive(Debug, Default)]
pub struct FixtureRepository {
    entries: Vec<RepoEntry>,
    sources: BTreeMap<String, Source>,
    by_title: BTreeMap<String, Vec<usize>>,
    fetches: AtomicUsize,
}

impl FixtureRepository {
    /// Entries without documents; fetching any of them fails.
    pub fn from_entries(entries: Vec<RepoEntry>) -> Self {
        let mut repo = FixtureRepository::default();
        for e in entries {
            repo.push(e, Source::Missing);
        }
        repo
    }

    pub fn with_document(mut self, entry: RepoEntry, document: RawDocument) -> Self {
        self.push(entry, Source::Document(document));
        self
    }

    /// Loads a manifest; `file` paths resolve against the manifest's
    /// directory.
    pub fn from_manifest(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| NavigationError::Config(format!("cannot read {}: {e}", path.display())))?;
        let manifest: Vec<ManifestEntry> = serde_json::from_str(&text)
            .map_err(|e| NavigationError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut repo = FixtureRepository::default();
        for m in manifest {
            if repo.sources.contains_key(&m.repo_doc_id) {
                return Err(NavigationError::Config(format!(
                    "duplicate repo_doc_id {:?} in {}",
                    m.repo_doc_id,
                    path.display()
                )));
            }
            let entry = RepoEntry {
                repo_doc_id: m.repo_doc_id,
                title: m.title,
                metadata: m.metadata,
            };
            repo.push(entry, Source::File(base.join(m.file)));
        }
        Ok(repo)
    }

    fn push(&mut self, entry: RepoEntry, source: Source) {
        self.by_title
            .entry(normalize_title(&entry.title))
            .or_default()
            .push(self.entries.len());
        self.sources.insert(entry.repo_doc_id.clone(), source);
        self.entries.push(entry);
    }

    pub fn entries(&self) -> &[RepoEntry] {
        &self.entries
    }

    /// Number of successful fetches so far.
    pub fn fetch_count(&self) -> usize {
        self.fetches.load(Ordering::SeqCst)
    }
}

impl Repository for FixtureRepository {
    fn id(&self) -> &str {
        "fixture"
    }

    fn search(&self, normalized_title: &str) -> Result<Vec<RepoEntry>> {
        match self.by_title.get(normalized_title) {
            Some(exact) => Ok(exact.iter().map(|&i| self.entries[i].clone()).collect()),
            None => Ok(self.entries.clone()),
        }
    }

    fn fetch(&self, repo_doc_id: &str) -> Result<RawDocument> {
        let failure = |reason: String| NavigationError::DocumentFailure {
            repo_doc_id: repo_doc_id.to_string(),
            reason,
        };
        let doc = match self.sources.get(repo_doc_id) {
            None => return Err(failure("not in the repository".into())),
            Some(Source::Missing) => return Err(failure("no document attached".into())),
            Some(Source::Document(doc)) => doc.clone(),
            Some(Source::File(path)) => {
                let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
                let kind = DocKind::from_extension(ext)
                    .ok_or_else(|| failure(format!("unsupported file type {ext:?}")))?;
                let bytes = std::fs::read(path).map_err(|e| failure(format!("{}: {e}", path.display())))?;
                let mut doc = RawDocument::new(repo_doc_id, kind, bytes);
                doc.source_uri = Some(path.display().to_string());
                doc
            }
        };
        self.fetches.fetch_add(1, Ordering::SeqCst);
        Ok(doc)
    }
}
