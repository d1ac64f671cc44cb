use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::intent::ReportIntent;
use super::{GenerationError, Result};
use crate::graph::{Graph, LabelSchema, NodeId, PropertyMap, PropertyValue, ValueType};

/// Characters of payload the model sees per categorization batch.
pub const CONTEXT_BUDGET_CHARS: usize = 12_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimensionItem {
    pub id: NodeId,
    pub properties: PropertyMap,
}

/// Bibliographic fields, pulled whether or not the intent asks for them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Citation {
    pub title: String,
    #[serde(default)]
    pub authors: Vec<String>,
    #[serde(default)]
    pub year: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PayloadRow {
    pub fact_id: NodeId,
    /// Every requested attribute; `None` marks it absent on this fact.
    pub attributes: BTreeMap<String, Option<PropertyValue>>,
    /// Every requested dimension label; an empty list marks it absent.
    pub dimensions: BTreeMap<String, Vec<DimensionItem>>,
    pub citation: Citation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PayloadTable {
    pub rows: Vec<PayloadRow>,
    /// Main text field of each requested dimension label.
    pub primary_fields: BTreeMap<String, String>,
}

impl PayloadRow {
    pub fn title(&self) -> &str {
        &self.citation.title
    }

    pub fn owns(&self, dimension: NodeId) -> bool {
        self.dimensions.values().flatten().any(|d| d.id == dimension)
    }
}

impl PayloadTable {
    pub fn row(&self, fact: NodeId) -> Option<&PayloadRow> {
        self.rows.iter().find(|r| r.fact_id == fact)
    }

    /// Main text of a dimension item, if it has one.
    pub fn text_of(&self, label: &str, item: &DimensionItem) -> Option<String> {
        let field = self.primary_fields.get(label)?;
        let text = item.properties.get(field)?.display_text();
        let text = text.trim();
        (!text.is_empty()).then(|| text.to_string())
    }
}

/// First required text property, else the first text property, else the
/// first property.
fn primary_field(schema: &LabelSchema) -> Option<String> {
    let props = &schema.properties;
    props
        .iter()
        .find(|(_, s)| s.required && s.value_type == ValueType::Text)
        .or_else(|| props.iter().find(|(_, s)| s.value_type == ValueType::Text))
        .or_else(|| props.iter().next())
        .map(|(k, _)| k.clone())
}

fn citation(props: &PropertyMap, id: NodeId) -> Citation {
    let authors = match props.get("authors") {
        Some(PropertyValue::TextList(items)) => items.clone(),
        Some(PropertyValue::Text(s)) => s.split(';').map(|a| a.trim().to_string()).filter(|a| !a.is_empty()).collect(),
        _ => Vec::new(),
    };
    Citation {
        title: props
            .get("title")
            .map(PropertyValue::display_text)
            .filter(|t| !t.trim().is_empty())
            .unwrap_or_else(|| id.to_hex()),
        authors,
        year: props.get("year").and_then(PropertyValue::as_integer),
    }
}

/// One row per selected fact, in selection order, with exactly the
/// requested attributes and dimensions read from the graph.
pub fn collect_payload(graph: &Graph, selected: &[NodeId], intent: &ReportIntent) -> Result<PayloadTable> {
    if selected.is_empty() {
        return Err(GenerationError::EmptySelection);
    }
    let mut seen = std::collections::BTreeSet::new();
    let mut rows = Vec::new();
    for &id in selected {
        if !seen.insert(id) {
            continue;
        }
        let fact = graph.fact(id).ok_or(GenerationError::UnknownFact(id))?;
        let attributes = intent
            .required_attributes
            .iter()
            .map(|a| (a.clone(), fact.properties.get(a).cloned()))
            .collect();
        let dimensions = intent
            .required_dimensions
            .iter()
            .map(|label| {
                let items = graph
                    .dimensions_of(id, label)
                    .into_iter()
                    .map(|d| DimensionItem {
                        id: d.id,
                        properties: d.properties.clone(),
                    })
                    .collect();
                (label.clone(), items)
            })
            .collect();
        rows.push(PayloadRow {
            fact_id: id,
            attributes,
            dimensions,
            citation: citation(&fact.properties, id),
        });
    }
    let primary_fields = intent
        .required_dimensions
        .iter()
        .filter_map(|label| {
            let schema = graph.schema().label(label)?;
            Some((label.clone(), primary_field(schema)?))
        })
        .collect();
    Ok(PayloadTable { rows, primary_fields })
}

/// `max(1, budget / average row size)`, sizes measured as JSON characters.
pub fn default_batch_size(payload: &PayloadTable) -> usize {
    if payload.rows.is_empty() {
        return 1;
    }
    let total: usize = payload
        .rows
        .iter()
        .map(|r| serde_json::to_string(r).map(|s| s.chars().count()).unwrap_or(0))
        .sum();
    let avg = (total / payload.rows.len()).max(1);
    (CONTEXT_BUDGET_CHARS / avg).max(1)
}
