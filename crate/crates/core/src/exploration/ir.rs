//! The query IR behind every exploration action, its native executor, and
//! its Cypher rendering.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::histogram::BucketKey;
use super::{ExplorationError, Result};
use crate::graph::{Direction, EdgeKind, Graph, Node, NodeId, Predicate, PropertyValue};
use crate::par::Exec;

/// A one-hop pattern `(a)-[:KIND]->(n)`; anchors then bind `a`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgePattern {
    pub kind: EdgeKind,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Filter {
    Has { attribute: String },
    Missing { attribute: String },
    Eq { attribute: String, value: PropertyValue },
    /// Case- and punctuation-insensitive substring.
    Contains { attribute: String, value: String },
    InBucket { attribute: String, buckets: Vec<BucketKey> },
}

impl Filter {
    pub fn attribute(&self) -> &str {
        match self {
            Filter::Has { attribute }
            | Filter::Missing { attribute }
            | Filter::Eq { attribute, .. }
            | Filter::Contains { attribute, .. }
            | Filter::InBucket { attribute, .. } => attribute,
        }
    }

    pub fn predicate(&self) -> Predicate {
        match self.clone() {
            Filter::Has { attribute } => Predicate::Has { attribute },
            Filter::Missing { attribute } => Predicate::Missing { attribute },
            Filter::Eq { attribute, value } => Predicate::Eq { attribute, value },
            Filter::Contains { attribute, value } => Predicate::Contains { attribute, value },
            Filter::InBucket { attribute, buckets } => Predicate::Or {
                any: buckets.iter().map(|b| b.predicate(&attribute)).collect(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Aggregate {
    pub group_by: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sort {
    pub attribute: String,
    #[serde(default)]
    pub descending: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryIR {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expand: Option<EdgePattern>,
    /// Bind `a` when `expand` is set, `n` otherwise.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub anchors: Vec<NodeId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub exclude: Vec<NodeId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub filters: Vec<Filter>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aggregate: Option<Aggregate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sort: Option<Sort>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<usize>,
}

/// Result of running a [`QueryIR`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryOutput {
    Nodes(Vec<NodeId>),
    /// Exact-value groups, ascending, missing values last.
    Groups(Vec<(Option<PropertyValue>, usize)>),
}

impl QueryIR {
    pub fn label(label: &str) -> Self {
        QueryIR {
            label: label.to_string(),
            expand: None,
            anchors: Vec::new(),
            exclude: Vec::new(),
            filters: Vec::new(),
            aggregate: None,
            sort: None,
            limit: None,
        }
    }

    pub fn filter(mut self, f: Filter) -> Self {
        self.filters.push(f);
        self
    }

    pub fn anchored(mut self, ids: impl IntoIterator<Item = NodeId>) -> Self {
        self.anchors = ids.into_iter().collect();
        self
    }

    pub fn limit(mut self, k: usize) -> Self {
        self.limit = Some(k);
        self
    }

    /// Structural checks that need no graph.
    pub fn check(&self) -> Result<()> {
        let invalid = |m: &str| Err(ExplorationError::InvalidIR(m.to_string()));
        if self.label.trim().is_empty() {
            return invalid("label is empty");
        }
        if self.aggregate.is_some() && self.sort.is_some() {
            return invalid("aggregate and sort are mutually exclusive");
        }
        if self.limit == Some(0) {
            return invalid("limit must be at least 1");
        }
        if self.expand.is_some() && self.anchors.is_empty() {
            return invalid("an edge pattern needs anchors");
        }
        if self
            .filters
            .iter()
            .any(|f| matches!(f, Filter::InBucket { buckets, .. } if buckets.is_empty()))
        {
            return invalid("bucket filter selects no buckets");
        }
        Ok(())
    }

    /// Every attribute the query reads.
    pub fn attributes(&self) -> BTreeSet<&str> {
        let mut out: BTreeSet<&str> = self.filters.iter().map(Filter::attribute).collect();
        out.extend(self.aggregate.as_ref().map(|a| a.group_by.as_str()));
        out.extend(self.sort.as_ref().map(|s| s.attribute.as_str()));
        out
    }

    fn validate(&self, graph: &Graph) -> Result<()> {
        self.check()?;
        if graph.schema().label(&self.label).is_none() {
            return Err(ExplorationError::UnknownLabel(self.label.clone()));
        }
        for attr in self.attributes() {
            if !graph.schema().has_attribute(&self.label, attr) {
                return Err(ExplorationError::UnknownAttribute {
                    label: self.label.clone(),
                    attribute: attr.to_string(),
                });
            }
        }
        Ok(())
    }

    /// Candidate ids before filtering, ascending.
    fn candidates(&self, graph: &Graph) -> Result<Vec<NodeId>> {
        let mut set: BTreeSet<NodeId> = match (&self.expand, self.anchors.is_empty()) {
            (Some(p), _) => {
                let mut out = BTreeSet::new();
                for &a in &self.anchors {
                    let ns = graph
                        .neighbors(a, p.kind, p.direction)
                        .map_err(|_| ExplorationError::UnknownNode(a))?;
                    out.extend(ns);
                }
                out
            }
            (None, false) => self.anchors.iter().copied().collect(),
            (None, true) => graph.ids_with_label(&self.label).into_iter().collect(),
        };
        for x in &self.exclude {
            set.remove(x);
        }
        Ok(set
            .into_iter()
            .filter(|id| graph.node(*id).is_some_and(|n| n.label() == self.label))
            .collect())
    }

    /// Runs the query against the embedded graph.
    pub fn execute(&self, graph: &Graph, exec: Exec) -> Result<QueryOutput> {
        self.validate(graph)?;
        let candidates = self.candidates(graph)?;
        let predicates: Vec<Predicate> = self.filters.iter().map(Filter::predicate).collect();
        let keep = exec.map(&candidates, |id| {
            let node = graph.node(*id).expect("candidate exists");
            predicates.iter().all(|p| p.matches(node))
        });
        let mut ids: Vec<NodeId> = candidates
            .into_iter()
            .zip(keep)
            .filter_map(|(id, k)| k.then_some(id))
            .collect();
        if let Some(agg) = &self.aggregate {
            let mut groups: BTreeMap<Option<PropertyValue>, usize> = BTreeMap::new();
            for id in &ids {
                let v = graph.node(*id).and_then(|n| n.property(&agg.group_by)).cloned();
                *groups.entry(v).or_default() += 1;
            }
            // BTreeMap puts None first; missing values go last
            let mut out: Vec<_> = groups.into_iter().collect();
            let shift = usize::from(out.first().is_some_and(|g| g.0.is_none()));
            out.rotate_left(shift);
            if let Some(k) = self.limit {
                out.truncate(k);
            }
            return Ok(QueryOutput::Groups(out));
        }
        if let Some(sort) = &self.sort {
            sort_nodes(graph, &mut ids, &sort.attribute, sort.descending);
        }
        if let Some(k) = self.limit {
            ids.truncate(k);
        }
        Ok(QueryOutput::Nodes(ids))
    }

    /// Deterministic Cypher text for the query.
    pub fn render_cypher(&self) -> Result<String> {
        self.check()?;
        let mut q = String::new();
        let n = format!("(n:{})", ident(&self.label));
        match &self.expand {
            None => write!(q, "MATCH {n}").unwrap(),
            Some(p) => {
                let kind = p.kind.as_str();
                match p.direction {
                    Direction::Out => write!(q, "MATCH (a)-[:{kind}]->{n}").unwrap(),
                    Direction::In => write!(q, "MATCH (a)<-[:{kind}]-{n}").unwrap(),
                    Direction::Both => write!(q, "MATCH (a)-[:{kind}]-{n}").unwrap(),
                }
            }
        }
        let mut conds = Vec::new();
        if !self.anchors.is_empty() {
            let var = if self.expand.is_some() { "a" } else { "n" };
            conds.push(format!("id({var}) IN {}", id_list(&self.anchors)));
        }
        if !self.exclude.is_empty() {
            conds.push(format!("NOT id(n) IN {}", id_list(&self.exclude)));
        }
        conds.extend(self.filters.iter().map(render_filter));
        if !conds.is_empty() {
            write!(q, " WHERE {}", conds.join(" AND ")).unwrap();
        }
        if let Some(agg) = &self.aggregate {
            let attr = prop("n", &agg.group_by);
            write!(q, " RETURN {attr} AS key, count(n) AS cnt ORDER BY key").unwrap();
        } else {
            let distinct = if self.expand.is_some() { "DISTINCT " } else { "" };
            write!(q, " RETURN {distinct}n").unwrap();
            if let Some(sort) = &self.sort {
                let dir = if sort.descending { " DESC" } else { "" };
                write!(q, " ORDER BY {}{dir}, id(n)", prop("n", &sort.attribute)).unwrap();
            }
        }
        if let Some(k) = self.limit {
            write!(q, " LIMIT {k}").unwrap();
        }
        Ok(q)
    }
}

/// Sorts by `attribute` (missing values last in either direction), ties by id.
pub fn sort_nodes(graph: &Graph, ids: &mut [NodeId], attribute: &str, descending: bool) {
    let value = |id: &NodeId| graph.node(*id).and_then(|n: &Node| n.property(attribute));
    ids.sort_by(|a, b| {
        let ord = match (value(a), value(b)) {
            (Some(x), Some(y)) if descending => y.cmp(x),
            (Some(x), Some(y)) => x.cmp(y),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => std::cmp::Ordering::Equal,
        };
        ord.then_with(|| a.cmp(b))
    });
}

fn is_plain_ident(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn ident(s: &str) -> String {
    if is_plain_ident(s) {
        s.to_string()
    } else {
        format!("`{}`", s.replace('`', "``"))
    }
}

fn prop(var: &str, attr: &str) -> String {
    format!("{var}.{}", ident(attr))
}

fn string_literal(s: &str) -> String {
    serde_json::to_string(s).expect("strings serialize")
}

fn id_list(ids: &[NodeId]) -> String {
    let items: Vec<String> = ids.iter().map(|id| string_literal(&id.to_hex())).collect();
    format!("[{}]", items.join(", "))
}

fn real_literal(r: f64) -> String {
    // Debug keeps a decimal point on integral values ("2.0")
    format!("{r:?}")
}

pub(crate) fn literal(v: &PropertyValue) -> String {
    match v {
        PropertyValue::Boolean(b) => b.to_string(),
        PropertyValue::Integer(i) => i.to_string(),
        PropertyValue::Real(r) => real_literal(*r),
        PropertyValue::Text(s) => string_literal(s),
        PropertyValue::TextList(items) => {
            let parts: Vec<String> = items.iter().map(|s| string_literal(s)).collect();
            format!("[{}]", parts.join(", "))
        }
    }
}

fn render_bucket(attr: &str, key: &BucketKey) -> String {
    let p = prop("n", attr);
    match key {
        BucketKey::Value(v) => format!("{p} = {}", literal(v)),
        BucketKey::Range { lo, hi, closed } => {
            let upper = if *closed { "<=" } else { "<" };
            format!("({p} >= {} AND {p} {upper} {})", real_literal(*lo), real_literal(*hi))
        }
        BucketKey::Missing => format!("{p} IS NULL"),
    }
}

fn render_filter(f: &Filter) -> String {
    match f {
        Filter::Has { attribute } => format!("{} IS NOT NULL", prop("n", attribute)),
        Filter::Missing { attribute } => format!("{} IS NULL", prop("n", attribute)),
        Filter::Eq { attribute, value } => format!("{} = {}", prop("n", attribute), literal(value)),
        Filter::Contains { attribute, value } => format!(
            "apoc.text.clean({}) CONTAINS {}",
            prop("n", attribute),
            string_literal(&crate::text::fold_alnum(value))
        ),
        Filter::InBucket { attribute, buckets } => match buckets.as_slice() {
            [one] => render_bucket(attribute, one),
            many => {
                let parts: Vec<String> = many.iter().map(|b| render_bucket(attribute, b)).collect();
                format!("({})", parts.join(" OR "))
            }
        },
    }
}
