use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::types::{EdgeKind, NodeRole, PropertyMap, PropertyValue, ValueType};
use super::{GraphError, Result};

/// Declared type of one property key.
///
/// Accepts the shorthand `"integer"` as well as
/// `{"type": "integer", "required": true}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "RawPropertySpec")]
pub struct PropertySpec {
    #[serde(rename = "type")]
    pub value_type: ValueType,
    #[serde(default)]
    pub required: bool,
}

impl PropertySpec {
    pub fn optional(value_type: ValueType) -> Self {
        PropertySpec {
            value_type,
            required: false,
        }
    }

    pub fn required(value_type: ValueType) -> Self {
        PropertySpec {
            value_type,
            required: true,
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawPropertySpec {
    Short(ValueType),
    Full {
        #[serde(rename = "type")]
        value_type: ValueType,
        #[serde(default)]
        required: bool,
    },
}

impl From<RawPropertySpec> for PropertySpec {
    fn from(raw: RawPropertySpec) -> Self {
        match raw {
            RawPropertySpec::Short(value_type) => PropertySpec::optional(value_type),
            RawPropertySpec::Full {
                value_type,
                required,
            } => PropertySpec {
                value_type,
                required,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSchema {
    pub role: NodeRole,
    pub properties: BTreeMap<String, PropertySpec>,
}

impl LabelSchema {
    pub fn new(role: NodeRole) -> Self {
        LabelSchema {
            role,
            properties: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, spec: PropertySpec) -> Self {
        self.properties.insert(key.to_string(), spec);
        self
    }
}

/// Label -> property schema, plus the set of permitted edge kinds.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphSchema {
    pub labels: BTreeMap<String, LabelSchema>,
    #[serde(default = "all_edge_kinds")]
    pub edge_kinds: BTreeSet<EdgeKind>,
}

fn all_edge_kinds() -> BTreeSet<EdgeKind> {
    EdgeKind::ALL.into_iter().collect()
}

impl GraphSchema {
    pub fn new() -> Self {
        GraphSchema {
            labels: BTreeMap::new(),
            edge_kinds: all_edge_kinds(),
        }
    }

    pub fn with_label(mut self, label: &str, schema: LabelSchema) -> Self {
        self.labels.insert(label.to_string(), schema);
        self
    }

    pub fn label(&self, label: &str) -> Option<&LabelSchema> {
        self.labels.get(label)
    }

    pub fn labels_with_role(&self, role: NodeRole) -> impl Iterator<Item = &str> {
        self.labels
            .iter()
            .filter(move |(_, s)| s.role == role)
            .map(|(l, _)| l.as_str())
    }

    pub fn has_attribute(&self, label: &str, key: &str) -> bool {
        self.labels
            .get(label)
            .is_some_and(|s| s.properties.contains_key(key))
    }

    /// Checks `props` against `label`: known label with the expected role,
    /// no undeclared keys, declared types, required keys present.
    pub fn validate(&self, label: &str, role: NodeRole, props: &PropertyMap) -> Result<()> {
        let schema = self
            .labels
            .get(label)
            .ok_or_else(|| GraphError::schema(label, "unknown label"))?;
        if schema.role != role {
            return Err(GraphError::schema(
                label,
                format!("label is declared for {:?} nodes", schema.role),
            ));
        }
        for (key, value) in props {
            let spec = schema
                .properties
                .get(key)
                .ok_or_else(|| GraphError::schema(label, format!("undeclared property {key:?}")))?;
            if value.value_type() != spec.value_type {
                return Err(GraphError::schema(
                    label,
                    format!(
                        "property {key:?} is {}, expected {}",
                        value.value_type(),
                        spec.value_type
                    ),
                ));
            }
            match value {
                PropertyValue::Real(r) if !r.is_finite() => {
                    return Err(GraphError::schema(label, format!("property {key:?} is not finite")));
                }
                PropertyValue::TextList(items) if items.iter().any(|s| s.is_empty()) => {
                    return Err(GraphError::schema(
                        label,
                        format!("property {key:?} has an empty list entry"),
                    ));
                }
                _ => {}
            }
        }
        for (key, spec) in &schema.properties {
            if spec.required && !props.contains_key(key) {
                return Err(GraphError::schema(label, format!("missing required property {key:?}")));
            }
        }
        Ok(())
    }

    /// Adds labels and keys from `other`. A key may never change type and a
    /// label may never change role.
    pub fn merge(&mut self, other: &GraphSchema) -> Result<()> {
        for (label, incoming) in &other.labels {
            match self.labels.get_mut(label) {
                None => {
                    self.labels.insert(label.clone(), incoming.clone());
                }
                Some(existing) => {
                    if existing.role != incoming.role {
                        return Err(GraphError::schema(label, "role conflict while merging schemas"));
                    }
                    for (key, spec) in &incoming.properties {
                        match existing.properties.get(key) {
                            Some(current) if current.value_type != spec.value_type => {
                                return Err(GraphError::schema(
                                    label,
                                    format!(
                                        "property {key:?} declared as {} and {}",
                                        current.value_type, spec.value_type
                                    ),
                                ));
                            }
                            Some(_) => {}
                            None => {
                                existing.properties.insert(key.clone(), *spec);
                            }
                        }
                    }
                }
            }
        }
        self.edge_kinds.extend(other.edge_kinds.iter().copied());
        Ok(())
    }
}
