//! Exploration sessions: the Past/Present/Future canvases, the staging list
//! of search results, and the action history.

use std::collections::BTreeSet;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::histogram::{attribute_histogram, filter_by_bucket, BucketKey, Histogram};
use super::ir::{Aggregate, Filter, QueryIR, QueryOutput};
use super::refine::{RefineSpec, RefinerView};
use super::{ExplorationError, Result};
use crate::graph::{Graph, NodeId, NodeRole};
use crate::par::Exec;

pub const DEFAULT_SEARCH_LIMIT: usize = 50;

fn default_limit() -> usize {
    DEFAULT_SEARCH_LIMIT
}

/// The node set a histogram is computed over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Population {
    /// Every node of `label` passing `filters`.
    Query {
        label: String,
        #[serde(default)]
        filters: Vec<Filter>,
    },
    /// The current search results.
    Staged,
    Past,
    Present,
    Future,
    /// The pre-queried neighbors of the open refiner view.
    View,
    Ids { ids: Vec<NodeId> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Action {
    Search {
        label: String,
        #[serde(default)]
        filters: Vec<Filter>,
        #[serde(default = "default_limit")]
        limit: usize,
    },
    Histogram {
        population: Population,
        attribute: String,
    },
    /// Narrows the population of the last histogram to one of its buckets;
    /// the result replaces the search results.
    BucketFilter {
        attribute: String,
        bucket: BucketKey,
    },
    Prequery {
        selected: Vec<NodeId>,
    },
    Refine {
        spec: RefineSpec,
    },
    /// Moves the present canvas into the past and `chosen` into the present.
    /// `chosen` may come from the future canvas or from the search results.
    Promote {
        chosen: Vec<NodeId>,
    },
}

/// What an action returns to its caller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActionOutcome {
    Nodes { ids: Vec<NodeId> },
    Histogram { histogram: Histogram },
    View { view: RefinerView },
    Canvases,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub seq: usize,
    pub action: Action,
    pub ir: QueryIR,
    pub cypher: String,
    pub timestamp_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LastHistogram {
    population: Population,
    ir: QueryIR,
    histogram: Histogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub created_ms: u64,
    pub updated_ms: u64,
    pub past: BTreeSet<NodeId>,
    pub present: BTreeSet<NodeId>,
    pub future: BTreeSet<NodeId>,
    /// Search results, outside every canvas.
    pub staged: Vec<NodeId>,
    #[serde(default)]
    staged_ir: Option<QueryIR>,
    #[serde(default)]
    pub view: Option<RefinerView>,
    #[serde(default)]
    last_histogram: Option<LastHistogram>,
    pub history: Vec<HistoryEntry>,
}

pub(crate) fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Everything an action changes, computed before anything is committed.
struct Step {
    outcome: ActionOutcome,
    ir: QueryIR,
    apply: Box<dyn FnOnce(&mut Session)>,
}

impl Session {
    pub fn new(id: impl Into<String>) -> Self {
        let now = now_ms();
        Session {
            id: id.into(),
            created_ms: now,
            updated_ms: now,
            past: BTreeSet::new(),
            present: BTreeSet::new(),
            future: BTreeSet::new(),
            staged: Vec::new(),
            staged_ir: None,
            view: None,
            last_histogram: None,
            history: Vec::new(),
        }
    }

    /// Runs `action`. On error the session is left untouched; on success
    /// exactly one history entry is appended.
    pub fn apply(&mut self, graph: &Graph, action: Action, exec: Exec) -> Result<ActionOutcome> {
        let step = self.plan(graph, &action, exec)?;
        let cypher = step.ir.render_cypher()?;
        (step.apply)(self);
        let now = now_ms();
        self.updated_ms = now;
        self.history.push(HistoryEntry {
            seq: self.history.len(),
            action,
            ir: step.ir,
            cypher,
            timestamp_ms: now,
        });
        Ok(step.outcome)
    }

    /// Replays `actions` into a fresh session.
    pub fn replay(graph: &Graph, id: impl Into<String>, actions: &[Action], exec: Exec) -> Result<Self> {
        let mut s = Session::new(id);
        for a in actions {
            s.apply(graph, a.clone(), exec)?;
        }
        Ok(s)
    }

    pub fn actions(&self) -> Vec<Action> {
        self.history.iter().map(|h| h.action.clone()).collect()
    }

    /// The three canvases as sorted lists.
    pub fn canvases(&self) -> [Vec<NodeId>; 3] {
        [&self.past, &self.present, &self.future].map(|c| c.iter().copied().collect())
    }

    fn plan(&self, graph: &Graph, action: &Action, exec: Exec) -> Result<Step> {
        match action {
            Action::Search { label, filters, limit } => {
                let ir = QueryIR {
                    filters: filters.clone(),
                    ..QueryIR::label(label)
                }
                .limit(*limit);
                let ids = nodes(ir.execute(graph, exec)?);
                let (staged, staged_ir) = (ids.clone(), ir.clone());
                Ok(Step {
                    outcome: ActionOutcome::Nodes { ids },
                    ir,
                    apply: Box::new(move |s| {
                        s.staged = staged;
                        s.staged_ir = Some(staged_ir);
                    }),
                })
            }
            Action::Histogram { population, attribute } => {
                let (ir, ids) = self.resolve(graph, population, exec)?;
                if !graph.schema().has_attribute(&ir.label, attribute) {
                    return Err(ExplorationError::UnknownAttribute {
                        label: ir.label.clone(),
                        attribute: attribute.clone(),
                    });
                }
                let histogram = attribute_histogram(graph, &ids, attribute, exec);
                let last = LastHistogram {
                    population: population.clone(),
                    ir: ir.clone(),
                    histogram: histogram.clone(),
                };
                let hist_ir = QueryIR {
                    aggregate: Some(Aggregate {
                        group_by: attribute.clone(),
                    }),
                    limit: None,
                    ..ir
                };
                Ok(Step {
                    outcome: ActionOutcome::Histogram { histogram },
                    ir: hist_ir,
                    apply: Box::new(move |s| s.last_histogram = Some(last)),
                })
            }
            Action::BucketFilter { attribute, bucket } => {
                let last = self
                    .last_histogram
                    .as_ref()
                    .filter(|l| &l.histogram.attribute == attribute)
                    .ok_or_else(|| ExplorationError::StaleBucket(format!("no histogram over {attribute:?}")))?;
                let (_, ids) = self.resolve(graph, &last.population, exec)?;
                let selected = filter_by_bucket(graph, &ids, &last.histogram, bucket)?;
                let mut ir = last.ir.clone();
                ir.limit = None;
                match bucket {
                    BucketKey::Value(v) => {
                        ir.filters.retain(|f| !matches!(f, Filter::Has { attribute: a } if a == attribute));
                        ir.filters.push(Filter::Eq {
                            attribute: attribute.clone(),
                            value: v.clone(),
                        });
                    }
                    _ => ir.filters.push(Filter::InBucket {
                        attribute: attribute.clone(),
                        buckets: vec![bucket.clone()],
                    }),
                }
                let (staged, staged_ir) = (selected.clone(), ir.clone());
                Ok(Step {
                    outcome: ActionOutcome::Nodes { ids: selected },
                    ir,
                    apply: Box::new(move |s| {
                        s.staged = staged;
                        s.staged_ir = Some(staged_ir);
                    }),
                })
            }
            Action::Prequery { selected } => {
                if selected.is_empty() {
                    return Err(ExplorationError::EmptySelection);
                }
                let outside: Vec<NodeId> = selected.iter().filter(|id| !self.present.contains(id)).copied().collect();
                if !outside.is_empty() {
                    return Err(ExplorationError::NotInPresent(outside));
                }
                let mut anchors = selected.clone();
                anchors.sort();
                anchors.dedup();
                let label = graph
                    .node(anchors[0])
                    .ok_or(ExplorationError::UnknownNode(anchors[0]))?
                    .label()
                    .to_string();
                let exclude: Vec<NodeId> = self.past.union(&self.present).copied().collect();
                let view = RefinerView::build(graph, &label, anchors, exclude, exec)?;
                let ir = view.ir();
                Ok(Step {
                    outcome: ActionOutcome::View { view: view.clone() },
                    ir,
                    apply: Box::new(move |s| {
                        s.view = Some(view);
                        s.future.clear();
                    }),
                })
            }
            Action::Refine { spec } => {
                let view = self.view.as_ref().ok_or(ExplorationError::NoView)?;
                let (ids, ir) = view.refine(graph, spec, exec)?;
                let future: BTreeSet<NodeId> = ids.iter().copied().collect();
                Ok(Step {
                    outcome: ActionOutcome::Nodes { ids },
                    ir,
                    apply: Box::new(move |s| s.future = future),
                })
            }
            Action::Promote { chosen } => {
                if chosen.is_empty() {
                    return Err(ExplorationError::EmptySelection);
                }
                let chosen: BTreeSet<NodeId> = chosen.iter().copied().collect();
                let staged: BTreeSet<NodeId> = self.staged.iter().copied().collect();
                let outside: Vec<NodeId> = chosen
                    .iter()
                    .filter(|id| !self.future.contains(id) && !staged.contains(id))
                    .copied()
                    .collect();
                if !outside.is_empty() {
                    return Err(ExplorationError::NotInFuture(outside));
                }
                let label = graph
                    .node(*chosen.iter().next().expect("non-empty"))
                    .map(|n| n.label().to_string())
                    .unwrap_or_else(|| fallback_label(graph));
                let ir = QueryIR::label(&label).anchored(chosen.iter().copied());
                Ok(Step {
                    outcome: ActionOutcome::Canvases,
                    ir,
                    apply: Box::new(move |s| {
                        let mut past: BTreeSet<NodeId> = s.past.union(&s.present).copied().collect();
                        past.retain(|id| !chosen.contains(id));
                        s.past = past;
                        s.present = chosen;
                        s.future.clear();
                        s.view = None;
                    }),
                })
            }
        }
    }

    /// The query and member ids of a population.
    fn resolve(&self, graph: &Graph, population: &Population, exec: Exec) -> Result<(QueryIR, Vec<NodeId>)> {
        let anchored = |ids: Vec<NodeId>| {
            let label = ids
                .first()
                .and_then(|id| graph.node(*id))
                .map(|n| n.label().to_string())
                .unwrap_or_else(|| fallback_label(graph));
            (QueryIR::label(&label).anchored(ids.iter().copied()), ids)
        };
        Ok(match population {
            Population::Query { label, filters } => {
                let ir = QueryIR {
                    filters: filters.clone(),
                    ..QueryIR::label(label)
                };
                let ids = nodes(ir.execute(graph, exec)?);
                (ir, ids)
            }
            Population::Staged => match &self.staged_ir {
                Some(ir) => (ir.clone(), self.staged.clone()),
                None => anchored(self.staged.clone()),
            },
            Population::Past => anchored(self.past.iter().copied().collect()),
            Population::Present => anchored(self.present.iter().copied().collect()),
            Population::Future => anchored(self.future.iter().copied().collect()),
            Population::View => {
                let view = self.view.as_ref().ok_or(ExplorationError::NoView)?;
                (view.ir(), view.population.clone())
            }
            Population::Ids { ids } => {
                let mut ids = ids.clone();
                ids.sort();
                ids.dedup();
                if let Some(missing) = ids.iter().find(|id| !graph.contains(**id)) {
                    return Err(ExplorationError::UnknownNode(*missing));
                }
                anchored(ids)
            }
        })
    }
}

fn nodes(out: QueryOutput) -> Vec<NodeId> {
    match out {
        QueryOutput::Nodes(ids) => ids,
        QueryOutput::Groups(_) => Vec::new(),
    }
}

/// First fact label of the schema, used to type empty anchored sets.
fn fallback_label(graph: &Graph) -> String {
    graph
        .schema()
        .labels_with_role(NodeRole::Fact)
        .next()
        .unwrap_or("Fact")
        .to_string()
}
