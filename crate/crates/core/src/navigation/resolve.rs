use serde::{Deserialize, Serialize};

use super::repo::{RepoEntry, Repository};
use super::{ReferenceRecord, Result};
use crate::text::normalize_title;

/// Minimum normalized edit similarity for a fuzzy title match.
pub const DEFAULT_THRESHOLD: f64 = 0.92;

/// A repository entry a reference resolved to. The document itself is
/// fetched separately, once, by whoever uses the hit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepositoryHit {
    pub entry: RepoEntry,
    pub similarity: f64,
}

/// `1 - levenshtein(a, b) / max(len(a), len(b))`, over chars.
pub fn similarity(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 1.0;
    }
    1.0 - strsim::levenshtein(a, b) as f64 / longest as f64
}

/// Exact normalized-title match first, then the most similar title at or
/// above `threshold`. Ties go to the smaller `repo_doc_id`. `Ok(None)` means
/// the reference is dropped.
pub fn resolve_reference(
    reference: &ReferenceRecord,
    repo: &dyn Repository,
    threshold: f64,
) -> Result<Option<RepositoryHit>> {
    let wanted = &reference.normalized_title;
    let candidates = repo.search(wanted)?;
    let mut best: Option<(f64, &RepoEntry)> = None;
    for entry in &candidates {
        let sim = similarity(wanted, &normalize_title(&entry.title));
        if sim < threshold {
            continue;
        }
        let better = match best {
            None => true,
            Some((s, e)) => sim > s || (sim == s && entry.repo_doc_id < e.repo_doc_id),
        };
        if better {
            best = Some((sim, entry));
        }
    }
    Ok(best.map(|(similarity, entry)| RepositoryHit {
        entry: entry.clone(),
        similarity,
    }))
}
