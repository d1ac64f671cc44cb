//! Workflow configuration: the subnode DAG plus the Fact label it fills.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::rule::RuleSpec;
use super::schema::{OutputKind, OutputSchema};
use super::{InspectionError, Result};
use crate::graph::{GraphSchema, LabelSchema, NodeRole, PropertySpec, ValueType};
use crate::text::singular;

pub const DEFAULT_RETRIEVAL_K: usize = 5;

/// Fact attribute that names a document; its normalized form keys the Fact id.
pub const TITLE_FIELD: &str = "title";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRef {
    pub name: String,
    /// Backend options carried through from the config; unused by the
    /// bundled providers.
    #[serde(flatten)]
    pub options: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Extractor {
    Rule(RuleSpec),
    Model { model_id: String, query: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct InspectNodeSpec {
    pub name: String,
    pub extractor: Extractor,
    pub output_schema: OutputSchema,
    /// Store a single-typed output as one Dimension node instead of Fact
    /// attributes.
    pub as_node: bool,
    pub retrieval_k: usize,
    /// Label of the Dimension nodes this subnode produces.
    pub label: String,
}

impl InspectNodeSpec {
    /// Whether the output lands on Dimension nodes rather than the Fact.
    pub fn produces_dimensions(&self) -> bool {
        self.output_schema.is_array() || self.as_node
    }
}

/// Which subnode output holds the references followed by navigation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NavigationSpec {
    pub reference_subnode: String,
    pub title_field: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactSpec {
    pub label: String,
    pub fields: BTreeMap<String, PropertySpec>,
}

impl Default for FactSpec {
    fn default() -> Self {
        let fields = [
            ("title", PropertySpec::required(ValueType::Text)),
            ("year", PropertySpec::optional(ValueType::Integer)),
            ("citation_count", PropertySpec::optional(ValueType::Integer)),
            ("authors", PropertySpec::optional(ValueType::TextList)),
        ];
        FactSpec {
            label: "Paper".into(),
            fields: fields.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkflowSpec {
    pub nodes: Vec<InspectNodeSpec>,
    /// (source, target) index pairs into `nodes`, deduplicated.
    pub edges: Vec<(usize, usize)>,
    pub fact: FactSpec,
    pub navigation: Option<NavigationSpec>,
    order: Vec<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWorkflow {
    dag: RawDag,
    #[serde(default)]
    fact: Option<FactSpec>,
    #[serde(default)]
    navigation: Option<NavigationSpec>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDag {
    #[serde(default)]
    nodes: Vec<RawNode>,
    #[serde(default)]
    edges: Vec<RawEdge>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNode {
    name: String,
    #[serde(default)]
    extract_from: Option<RuleSpec>,
    #[serde(default)]
    model: Option<ModelRef>,
    #[serde(default)]
    query: Option<String>,
    output_schema: OutputSchema,
    #[serde(default)]
    as_node: bool,
    #[serde(default)]
    retrieval_k: Option<usize>,
    #[serde(default)]
    label: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEdge {
    source: String,
    target: String,
}

fn malformed(msg: impl Into<String>) -> InspectionError {
    InspectionError::MalformedConfig(msg.into())
}

fn build_node(raw: RawNode) -> Result<InspectNodeSpec> {
    let name = raw.name.trim().to_string();
    if name.is_empty() {
        return Err(malformed("subnode name is empty"));
    }
    let extractor = match (raw.extract_from, raw.model, raw.query) {
        (Some(rule), None, None) => Extractor::Rule(rule),
        (None, Some(model), Some(query)) => {
            if model.name.trim().is_empty() {
                return Err(malformed(format!("subnode {name:?}: model name is empty")));
            }
            if query.trim().is_empty() {
                return Err(malformed(format!("subnode {name:?}: query is empty")));
            }
            Extractor::Model {
                model_id: model.name,
                query,
            }
        }
        (None, Some(_), None) => return Err(malformed(format!("subnode {name:?}: model without query"))),
        _ => {
            return Err(malformed(format!(
                "subnode {name:?}: set exactly one of extract_from or model+query"
            )))
        }
    };
    if raw.as_node && raw.output_schema.kind == OutputKind::ArrayTyped {
        return Err(malformed(format!("subnode {name:?}: as_node applies to single_typed outputs only")));
    }
    let retrieval_k = raw.retrieval_k.unwrap_or(DEFAULT_RETRIEVAL_K);
    if retrieval_k == 0 {
        return Err(malformed(format!("subnode {name:?}: retrieval_k must be at least 1")));
    }
    let label = raw.label.unwrap_or_else(|| singular(&name));
    Ok(InspectNodeSpec {
        name,
        extractor,
        output_schema: raw.output_schema,
        as_node: raw.as_node,
        retrieval_k,
        label,
    })
}

/// Parses and validates a workflow config.
pub fn parse_workflow(config_text: &str) -> Result<WorkflowSpec> {
    let raw: RawWorkflow = serde_json::from_str(config_text).map_err(|e| malformed(e.to_string()))?;
    let mut nodes = Vec::with_capacity(raw.dag.nodes.len());
    let mut index = BTreeMap::new();
    for raw_node in raw.dag.nodes {
        let node = build_node(raw_node)?;
        if index.insert(node.name.clone(), nodes.len()).is_some() {
            return Err(InspectionError::DuplicateNodeName(node.name));
        }
        nodes.push(node);
    }
    let mut edges = BTreeSet::new();
    for e in &raw.dag.edges {
        let lookup = |n: &str| {
            index
                .get(n.trim())
                .copied()
                .ok_or_else(|| InspectionError::UnknownEdgeEndpoint(n.to_string()))
        };
        edges.insert((lookup(&e.source)?, lookup(&e.target)?));
    }
    let mut spec = WorkflowSpec {
        nodes,
        edges: edges.into_iter().collect(),
        fact: raw.fact.unwrap_or_default(),
        navigation: raw.navigation,
        order: Vec::new(),
    };
    spec.order = kahn_order(spec.nodes.len(), &spec.edges).map_err(|stuck| {
        InspectionError::CycleDetected(stuck.into_iter().map(|i| spec.nodes[i].name.clone()).collect())
    })?;
    if spec.fact.label.trim().is_empty() {
        return Err(malformed("fact label is empty"));
    }
    match spec.fact.fields.get(TITLE_FIELD) {
        Some(f) if f.value_type == ValueType::Text => {}
        _ => return Err(malformed("the fact schema needs a text \"title\" field")),
    }
    spec.validate_navigation()?;
    spec.graph_schema()?;
    Ok(spec)
}

/// Kahn's algorithm, always releasing the earliest-declared ready node.
/// On a cycle, returns the nodes that never became ready.
fn kahn_order(n: usize, edges: &[(usize, usize)]) -> std::result::Result<Vec<usize>, Vec<usize>> {
    let mut indegree = vec![0usize; n];
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(s, t) in edges {
        indegree[t] += 1;
        out[s].push(t);
    }
    let mut ready: BinaryHeap<Reverse<usize>> =
        (0..n).filter(|&i| indegree[i] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(i)) = ready.pop() {
        order.push(i);
        for &t in &out[i] {
            indegree[t] -= 1;
            if indegree[t] == 0 {
                ready.push(Reverse(t));
            }
        }
    }
    if order.len() == n {
        Ok(order)
    } else {
        Err((0..n).filter(|&i| indegree[i] > 0).collect())
    }
}

impl WorkflowSpec {
    pub fn node(&self, name: &str) -> Option<&InspectNodeSpec> {
        self.nodes.iter().find(|n| n.name == name)
    }

    /// Node indices with every edge source ahead of its target; ties keep
    /// declaration order.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn topological_order(&self) -> Vec<&str> {
        self.order.iter().map(|&i| self.nodes[i].name.as_str()).collect()
    }

    /// Direct predecessors of node `i`, in declaration order.
    pub fn predecessors(&self, i: usize) -> Vec<usize> {
        self.edges.iter().filter(|e| e.1 == i).map(|e| e.0).collect()
    }

    pub fn has_model_nodes(&self) -> bool {
        self.nodes.iter().any(|n| matches!(n.extractor, Extractor::Model { .. }))
    }

    /// The reference subnode and title field, explicit or defaulted to a
    /// subnode named "References".
    pub fn reference_source(&self) -> Option<(&InspectNodeSpec, String)> {
        match &self.navigation {
            Some(nav) => self
                .node(&nav.reference_subnode)
                .map(|n| (n, nav.title_field.clone())),
            None => self
                .node("References")
                .filter(|n| n.output_schema.is_array())
                .map(|n| (n, n.output_schema.primary_field().to_string())),
        }
    }

    fn validate_navigation(&self) -> Result<()> {
        let Some(nav) = &self.navigation else { return Ok(()) };
        let node = self
            .node(&nav.reference_subnode)
            .ok_or_else(|| malformed(format!("navigation names unknown subnode {:?}", nav.reference_subnode)))?;
        if !node.output_schema.is_array() {
            return Err(malformed("the reference subnode must be array_typed"));
        }
        match node.output_schema.fields.get(&nav.title_field) {
            Some(ValueType::Text) => Ok(()),
            _ => Err(malformed(format!(
                "reference subnode has no text field {:?}",
                nav.title_field
            ))),
        }
    }

    /// Graph schema induced by the workflow: the Fact label with its
    /// declared fields plus every single-typed attribute output, and one
    /// Dimension label per dimension-producing subnode.
    pub fn graph_schema(&self) -> Result<GraphSchema> {
        let mut fact = LabelSchema::new(NodeRole::Fact);
        fact.properties = self.fact.fields.clone();
        let mut schema = GraphSchema::new();
        for node in &self.nodes {
            if node.produces_dimensions() {
                if node.label == self.fact.label {
                    return Err(malformed(format!(
                        "subnode {:?} uses the fact label {:?}",
                        node.name, node.label
                    )));
                }
                let ls = node.output_schema.label_schema(NodeRole::Dimension);
                if let Some(existing) = schema.label(&node.label) {
                    if existing != &ls {
                        return Err(malformed(format!(
                            "dimension label {:?} is produced with two different schemas",
                            node.label
                        )));
                    }
                }
                schema = schema.with_label(&node.label, ls);
            } else {
                for (key, ty) in &node.output_schema.fields {
                    match fact.properties.get(key) {
                        Some(spec) if spec.value_type != *ty => {
                            return Err(malformed(format!(
                                "fact attribute {key:?} declared as {} and {ty}",
                                spec.value_type
                            )))
                        }
                        Some(_) => {}
                        None => {
                            fact.properties.insert(key.clone(), PropertySpec::optional(*ty));
                        }
                    }
                }
            }
        }
        Ok(schema.with_label(&self.fact.label, fact))
    }
}
