use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::intent::ReportIntent;
use super::model::{CategorizeContext, GenerationModel};
use super::payload::{PayloadRow, PayloadTable};
use super::{GenerationError, Result};
use crate::graph::NodeId;

/// Category collecting the facts no batch placed.
pub const MISC_CATEGORY: &str = "Misc";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Member {
    pub fact: NodeId,
    #[serde(default)]
    pub evidence: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Category {
    pub name: String,
    #[serde(default)]
    pub rationale: String,
    pub members: Vec<Member>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MindMap {
    pub root: String,
    pub categories: Vec<Category>,
    /// Batches the model failed on; their facts went to [`MISC_CATEGORY`].
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl MindMap {
    pub fn category_names(&self) -> Vec<String> {
        self.categories.iter().map(|c| c.name.clone()).collect()
    }

    /// Every fact appearing in some category.
    pub fn covered(&self) -> BTreeSet<NodeId> {
        self.categories.iter().flat_map(|c| c.members.iter().map(|m| m.fact)).collect()
    }

    /// Checks coverage of `payload`, evidence locality, unique non-empty
    /// names and non-empty categories.
    pub fn validate(&self, payload: &PayloadTable) -> Result<()> {
        let invalid = |m: String| Err(GenerationError::InvalidMindMap(m));
        if self.categories.is_empty() {
            return Err(GenerationError::EmptyMindMap);
        }
        let mut names = BTreeSet::new();
        for c in &self.categories {
            if c.name.trim().is_empty() {
                return invalid("a category has no name".into());
            }
            if !names.insert(c.name.as_str()) {
                return invalid(format!("duplicate category {:?}", c.name));
            }
            if c.members.is_empty() {
                return invalid(format!("category {:?} has no members", c.name));
            }
            for m in &c.members {
                let Some(row) = payload.row(m.fact) else {
                    return invalid(format!("category {:?} holds unselected fact {}", c.name, m.fact));
                };
                if let Some(e) = m.evidence.iter().find(|e| !row.owns(**e)) {
                    return invalid(format!("evidence {e} does not belong to fact {}", m.fact));
                }
            }
        }
        let covered = self.covered();
        if let Some(missing) = payload.rows.iter().find(|r| !covered.contains(&r.fact_id)) {
            return invalid(format!("fact {} is in no category", missing.fact_id));
        }
        Ok(())
    }

    fn place(&mut self, name: &str, rationale: Option<String>, fact: NodeId, evidence: Vec<NodeId>) {
        let idx = match self.categories.iter().position(|c| c.name == name) {
            Some(i) => i,
            None => {
                self.categories.push(Category {
                    name: name.to_string(),
                    rationale: rationale.unwrap_or_default(),
                    members: Vec::new(),
                });
                self.categories.len() - 1
            }
        };
        let members = &mut self.categories[idx].members;
        match members.iter_mut().find(|m| m.fact == fact) {
            Some(m) => {
                for e in evidence {
                    if !m.evidence.contains(&e) {
                        m.evidence.push(e);
                    }
                }
            }
            None => members.push(Member { fact, evidence }),
        }
    }
}

/// Organizes the payload rows into categories, `batch_size` rows per model
/// call. Facts the model leaves unplaced, or that were in a failed batch,
/// land in [`MISC_CATEGORY`], so every row is covered.
pub fn build_mindmap(
    payload: &PayloadTable,
    intent: &ReportIntent,
    model: &dyn GenerationModel,
    batch_size: usize,
) -> Result<MindMap> {
    if batch_size == 0 {
        return Err(GenerationError::InvalidBatchSize);
    }
    if payload.rows.is_empty() {
        return Err(GenerationError::EmptySelection);
    }
    let mut map = MindMap {
        root: intent.instruction.clone(),
        categories: Vec::new(),
        warnings: Vec::new(),
    };
    let rows: Vec<&PayloadRow> = payload.rows.iter().collect();
    for (i, batch) in rows.chunks(batch_size).enumerate() {
        let existing = map.category_names();
        let ctx = CategorizeContext {
            intent,
            payload,
            existing: &existing,
            batch: i,
        };
        let placements = match model.categorize(batch, &ctx) {
            Ok(p) => p,
            Err(e) => {
                map.warnings.push(format!("batch {i}: {e}"));
                continue;
            }
        };
        for p in placements {
            let Some(row) = batch.iter().find(|r| r.fact_id == p.fact) else {
                continue;
            };
            let name = p.category.trim();
            if name.is_empty() {
                continue;
            }
            let mut evidence: Vec<NodeId> = Vec::new();
            for e in p.evidence {
                if row.owns(e) && !evidence.contains(&e) {
                    evidence.push(e);
                }
            }
            map.place(name, p.rationale, p.fact, evidence);
        }
    }
    let covered = map.covered();
    for row in payload.rows.iter().filter(|r| !covered.contains(&r.fact_id)) {
        map.place(MISC_CATEGORY, Some("Not placed in any other category".into()), row.fact_id, Vec::new());
    }
    Ok(map)
}
