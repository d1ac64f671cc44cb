use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::repo::{RepoEntry, Repository};
use super::resolve::{resolve_reference, RepositoryHit, DEFAULT_THRESHOLD};
use super::{canonical_id, NavigationError, ReferenceRecord, Result};
use crate::graph::{EdgeKind, GraphStore, NodeId, PropertyValue};
use crate::inspection::{materialize, run_inspection, Services, WorkflowSpec, TITLE_FIELD};
use crate::par::Exec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpansionBudget {
    pub max_depth: u32,
    pub max_new_facts: usize,
    pub per_fact_reference_cap: usize,
}

impl Default for ExpansionBudget {
    fn default() -> Self {
        ExpansionBudget {
            max_depth: 1,
            max_new_facts: 10,
            per_fact_reference_cap: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailedDocument {
    pub repo_doc_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpandStats {
    pub references_considered: usize,
    /// References no repository entry matched; they leave no graph trace.
    pub references_dropped: usize,
    /// References that resolved to a fact already in the graph (or already
    /// planned at this level); these only add an edge.
    pub resolved_existing: usize,
    /// Resolved references not fetched because the fact budget ran out.
    pub budget_skipped: usize,
    pub failed_documents: Vec<FailedDocument>,
    /// Frontier facts that have no reference dimensions.
    pub facts_without_references: usize,
    pub depth_reached: u32,
}

/// Everything one expansion added to the graph.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphDelta {
    pub new_facts: Vec<NodeId>,
    pub new_dimensions: Vec<NodeId>,
    /// NAVIGATES_TO edges, citing to cited.
    pub new_links: Vec<(NodeId, NodeId)>,
    pub stats: ExpandStats,
}

/// Reference titles of `fact`, in extraction order.
fn references_of(store: &GraphStore, spec: &WorkflowSpec, fact: NodeId) -> Vec<String> {
    let Some((node, field)) = spec.reference_source() else {
        return Vec::new();
    };
    store
        .graph()
        .dimensions_of(fact, &node.label)
        .into_iter()
        .filter_map(|d| d.properties.get(&field).and_then(PropertyValue::as_text))
        .map(str::to_string)
        .collect()
}

struct Planned {
    id: NodeId,
    entry: RepoEntry,
}

/// Expansion settings: the workflow run on new documents, where they come
/// from, and how references are matched.
#[derive(Clone, Copy)]
pub struct Navigator<'a> {
    pub spec: &'a WorkflowSpec,
    pub repo: &'a dyn Repository,
    pub services: &'a Services,
    pub threshold: f64,
    pub exec: Exec,
}

impl<'a> Navigator<'a> {
    pub fn new(spec: &'a WorkflowSpec, repo: &'a dyn Repository, services: &'a Services) -> Self {
        Navigator {
            spec,
            repo,
            services,
            threshold: DEFAULT_THRESHOLD,
            exec: Exec::default(),
        }
    }

    pub fn with_exec(self, exec: Exec) -> Self {
        Navigator { exec, ..self }
    }

    /// Breadth-first expansion from `seeds` along their extracted references.
    ///
    /// Each level is planned sequentially (which references resolve, which
    /// facts are new, which edges to draw), then new documents are fetched
    /// and inspected under the execution policy, then everything is written
    /// in plan order. The outcome is therefore independent of the policy.
    pub fn expand(&self, store: &mut GraphStore, seeds: &[NodeId], budget: ExpansionBudget) -> Result<GraphDelta> {
        let Navigator {
            spec,
            repo,
            services,
            threshold,
            exec,
        } = *self;
        if budget.per_fact_reference_cap == 0 {
            return Err(NavigationError::Config("per_fact_reference_cap must be at least 1".into()));
        }
        let mut frontier: Vec<NodeId> = Vec::new();
        for &s in seeds {
            if store.graph().fact(s).is_none() {
                return Err(NavigationError::UnknownSeed(s));
            }
            if !frontier.contains(&s) {
                frontier.push(s);
            }
        }
        let mut delta = GraphDelta::default();
        let mut depth = 0;
        while depth < budget.max_depth && !frontier.is_empty() {
            depth += 1;
            delta.stats.depth_reached = depth;

            let mut refs: Vec<ReferenceRecord> = Vec::new();
            for &f in &frontier {
                let titles = references_of(store, spec, f);
                if titles.is_empty() {
                    delta.stats.facts_without_references += 1;
                }
                refs.extend(
                    titles
                        .iter()
                        .take(budget.per_fact_reference_cap)
                        .filter_map(|t| ReferenceRecord::new(t, f).ok()),
                );
            }
            delta.stats.references_considered += refs.len();
            let resolved: Vec<Result<Option<RepositoryHit>>> =
                exec.map(&refs, |r| resolve_reference(r, repo, threshold));

            let mut planned: Vec<Planned> = Vec::new();
            let mut planned_ids: BTreeSet<NodeId> = BTreeSet::new();
            let mut links: Vec<(NodeId, NodeId)> = Vec::new();
            for (r, res) in refs.iter().zip(resolved) {
                let Some(hit) = res? else {
                    delta.stats.references_dropped += 1;
                    continue;
                };
                let Ok(id) = canonical_id(&hit.entry.title) else {
                    delta.stats.references_dropped += 1;
                    continue;
                };
                if store.graph().contains(id) || planned_ids.contains(&id) {
                    delta.stats.resolved_existing += 1;
                } else if delta.new_facts.len() + planned.len() < budget.max_new_facts {
                    planned_ids.insert(id);
                    planned.push(Planned { id, entry: hit.entry });
                } else {
                    delta.stats.budget_skipped += 1;
                    continue;
                }
                if r.source_fact != id && !links.contains(&(r.source_fact, id)) {
                    links.push((r.source_fact, id));
                }
            }

            let inspected = exec.map(&planned, |p| {
                let doc = repo.fetch(&p.entry.repo_doc_id)?;
                let mut out = run_inspection(&doc, spec, services)?;
                // the repository title keys the fact, so re-encounters dedupe
                out.fact_properties
                    .insert(TITLE_FIELD.to_string(), PropertyValue::Text(p.entry.title.clone()));
                Ok::<_, NavigationError>(out)
            });

            let mut next = Vec::new();
            let mut failed: BTreeSet<NodeId> = BTreeSet::new();
            for (p, result) in planned.iter().zip(inspected) {
                let written = result.and_then(|out| Ok(materialize(store, spec, &out)?));
                match written {
                    Ok(m) => {
                        debug_assert_eq!(m.fact, p.id);
                        delta.new_facts.push(m.fact);
                        delta.new_dimensions.extend(m.dimensions);
                        next.push(m.fact);
                    }
                    Err(NavigationError::RepositoryUnavailable(e)) => {
                        return Err(NavigationError::RepositoryUnavailable(e))
                    }
                    Err(e) => {
                        failed.insert(p.id);
                        delta.stats.failed_documents.push(FailedDocument {
                            repo_doc_id: p.entry.repo_doc_id.clone(),
                            reason: e.to_string(),
                        });
                    }
                }
            }
            for (source, target) in links {
                if failed.contains(&target) || store.graph().has_edge(EdgeKind::NavigatesTo, source, target) {
                    continue;
                }
                store.link_facts(source, target)?;
                delta.new_links.push((source, target));
            }
            if delta.new_facts.len() >= budget.max_new_facts {
                break;
            }
            frontier = next;
        }
        Ok(delta)
    }
}
