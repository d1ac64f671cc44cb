use serde::{Deserialize, Serialize};

use super::types::{Node, PropertyValue};
use crate::text::fold_alnum;

/// Attribute filter evaluated by scans.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Predicate {
    Always,
    Has { attribute: String },
    Missing { attribute: String },
    Eq { attribute: String, value: PropertyValue },
    /// Substring match after folding both sides to lowercase alphanumerics.
    Contains { attribute: String, value: String },
    /// `lo <= v < hi`, or `lo <= v <= hi` when `closed`.
    Range { attribute: String, lo: f64, hi: f64, closed: bool },
    And { all: Vec<Predicate> },
    Or { any: Vec<Predicate> },
}

impl Predicate {
    pub fn matches(&self, node: &Node) -> bool {
        match self {
            Predicate::Always => true,
            Predicate::Has { attribute } => node.property(attribute).is_some(),
            Predicate::Missing { attribute } => node.property(attribute).is_none(),
            Predicate::Eq { attribute, value } => node.property(attribute) == Some(value),
            Predicate::Contains { attribute, value } => {
                let needle = fold_alnum(value);
                match node.property(attribute) {
                    Some(PropertyValue::Text(s)) => fold_alnum(s).contains(&needle),
                    Some(PropertyValue::TextList(items)) => {
                        items.iter().any(|s| fold_alnum(s).contains(&needle))
                    }
                    _ => false,
                }
            }
            Predicate::Range {
                attribute,
                lo,
                hi,
                closed,
            } => match node.property(attribute).and_then(PropertyValue::as_real) {
                Some(v) => v >= *lo && (v < *hi || (*closed && v <= *hi)),
                None => false,
            },
            Predicate::And { all } => all.iter().all(|p| p.matches(node)),
            Predicate::Or { any } => any.iter().any(|p| p.matches(node)),
        }
    }

    /// Attribute names referenced by the predicate.
    pub fn attributes(&self) -> Vec<&str> {
        match self {
            Predicate::Always => vec![],
            Predicate::Has { attribute }
            | Predicate::Missing { attribute }
            | Predicate::Eq { attribute, .. }
            | Predicate::Contains { attribute, .. }
            | Predicate::Range { attribute, .. } => vec![attribute.as_str()],
            Predicate::And { all: ps } | Predicate::Or { any: ps } => {
                ps.iter().flat_map(Predicate::attributes).collect()
            }
        }
    }
}
