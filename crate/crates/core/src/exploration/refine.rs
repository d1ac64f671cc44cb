//! The neighbor refiner: summarize a pre-queried neighbor population as a
//! histogram or table, and select groups or the top k from it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::histogram::{attribute_histogram, filter_by_bucket, BucketKey, Histogram};
use super::ir::{sort_nodes, EdgePattern, Filter, QueryIR, Sort};
use super::{ExplorationError, Result};
use crate::graph::{Direction, EdgeKind, Graph, NodeId, PropertyValue};
use crate::par::Exec;

/// Rows included in a view's table preview.
pub const TABLE_PREVIEW_ROWS: usize = 500;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableRow {
    pub id: NodeId,
    pub values: BTreeMap<String, PropertyValue>,
}

/// Summary of a neighbor population. Nothing in it is on a canvas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinerView {
    pub label: String,
    /// The selected nodes whose neighbors were pre-queried.
    pub anchors: Vec<NodeId>,
    /// Nodes excluded because they were already on a canvas.
    pub exclude: Vec<NodeId>,
    pub population: Vec<NodeId>,
    pub total: usize,
    pub histogram: Histogram,
    pub columns: Vec<String>,
    /// First [`TABLE_PREVIEW_ROWS`] members by id.
    pub rows: Vec<TableRow>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SortDirection {
    Asc,
    #[default]
    Desc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum RefineSpec {
    /// Every member in any of `buckets` of the histogram over `attribute`
    /// (default: the view's histogram attribute).
    HistogramSelect {
        #[serde(default)]
        attribute: Option<String>,
        buckets: Vec<BucketKey>,
    },
    /// The `top_k` members by `sort`, missing values last, ties by id.
    Table {
        sort: String,
        #[serde(default)]
        direction: SortDirection,
        top_k: usize,
    },
}

/// Default histogram attribute of a view: "year" when the label has it,
/// else its first attribute.
pub fn default_attribute(graph: &Graph, label: &str) -> Option<String> {
    let schema = graph.schema().label(label)?;
    if schema.properties.contains_key("year") {
        return Some("year".into());
    }
    schema.properties.keys().next().cloned()
}

impl RefinerView {
    /// The query that produced the population.
    pub fn ir(&self) -> QueryIR {
        QueryIR {
            expand: Some(EdgePattern {
                kind: EdgeKind::NavigatesTo,
                direction: Direction::Out,
            }),
            anchors: self.anchors.clone(),
            exclude: self.exclude.clone(),
            ..QueryIR::label(&self.label)
        }
    }

    /// Pre-queries the outgoing NAVIGATES_TO neighbors of `anchors`, minus
    /// `exclude`.
    pub fn build(graph: &Graph, label: &str, anchors: Vec<NodeId>, exclude: Vec<NodeId>, exec: Exec) -> Result<Self> {
        let mut view = RefinerView {
            label: label.to_string(),
            anchors,
            exclude,
            population: Vec::new(),
            total: 0,
            histogram: attribute_histogram(graph, &[], "", exec),
            columns: Vec::new(),
            rows: Vec::new(),
        };
        let population = match view.ir().execute(graph, exec)? {
            super::ir::QueryOutput::Nodes(ids) => ids,
            super::ir::QueryOutput::Groups(_) => unreachable!("no aggregate in a prequery"),
        };
        let attribute = default_attribute(graph, label)
            .ok_or_else(|| ExplorationError::UnknownLabel(label.to_string()))?;
        view.histogram = attribute_histogram(graph, &population, &attribute, exec);
        let mut columns = vec!["title".to_string(), attribute];
        if graph.schema().has_attribute(label, "citation_count") {
            columns.push("citation_count".into());
        }
        columns.retain(|c| graph.schema().has_attribute(label, c));
        columns.dedup();
        view.rows = population
            .iter()
            .take(TABLE_PREVIEW_ROWS)
            .map(|id| TableRow {
                id: *id,
                values: columns
                    .iter()
                    .filter_map(|c| {
                        let v = graph.node(*id)?.property(c)?;
                        Some((c.clone(), v.clone()))
                    })
                    .collect(),
            })
            .collect();
        view.columns = columns;
        view.total = population.len();
        view.population = population;
        Ok(view)
    }

    fn check_attribute(&self, graph: &Graph, attribute: &str) -> Result<()> {
        if graph.schema().has_attribute(&self.label, attribute) {
            Ok(())
        } else {
            Err(ExplorationError::UnknownAttribute {
                label: self.label.clone(),
                attribute: attribute.to_string(),
            })
        }
    }

    /// Selects from the population. An empty result is a value, not an error.
    pub fn refine(&self, graph: &Graph, spec: &RefineSpec, exec: Exec) -> Result<(Vec<NodeId>, QueryIR)> {
        let mut ir = self.ir();
        match spec {
            RefineSpec::HistogramSelect { attribute, buckets } => {
                let attribute = attribute.as_deref().unwrap_or(&self.histogram.attribute);
                self.check_attribute(graph, attribute)?;
                if buckets.is_empty() {
                    return Err(ExplorationError::EmptySelection);
                }
                let histogram = if attribute == self.histogram.attribute {
                    self.histogram.clone()
                } else {
                    attribute_histogram(graph, &self.population, attribute, exec)
                };
                let mut out = Vec::new();
                for key in buckets {
                    out.extend(filter_by_bucket(graph, &self.population, &histogram, key)?);
                }
                out.sort();
                out.dedup();
                ir.filters.push(Filter::InBucket {
                    attribute: attribute.to_string(),
                    buckets: buckets.clone(),
                });
                Ok((out, ir))
            }
            RefineSpec::Table { sort, direction, top_k } => {
                self.check_attribute(graph, sort)?;
                if *top_k == 0 {
                    return Err(ExplorationError::InvalidIR("top_k must be at least 1".into()));
                }
                let mut ids = self.population.clone();
                let descending = *direction == SortDirection::Desc;
                sort_nodes(graph, &mut ids, sort, descending);
                ids.truncate(*top_k);
                ir.sort = Some(Sort {
                    attribute: sort.clone(),
                    descending,
                });
                ir.limit = Some(*top_k);
                Ok((ids, ir))
            }
        }
    }
}
