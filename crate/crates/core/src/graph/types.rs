use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

/// 16-byte content hash, rendered as 32 lowercase hex characters.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId([u8; 16]);

impl NodeId {
    /// Truncated SHA-256 of `key`.
    pub fn from_key(key: &[u8]) -> Self {
        let digest = Sha256::digest(key);
        let mut bytes = [0u8; 16];
        bytes.copy_from_slice(&digest[..16]);
        NodeId(bytes)
    }

    pub fn from_bytes(bytes: [u8; 16]) -> Self {
        NodeId(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 16] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NodeId({})", self.to_hex())
    }
}

impl FromStr for NodeId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let raw = hex::decode(s).map_err(|e| format!("invalid node id {s:?}: {e}"))?;
        let bytes: [u8; 16] = raw
            .try_into()
            .map_err(|_| format!("invalid node id {s:?}: expected 32 hex chars"))?;
        Ok(NodeId(bytes))
    }
}

impl Serialize for NodeId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for NodeId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueType {
    Text,
    Integer,
    Real,
    Boolean,
    TextList,
}

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ValueType::Text => "text",
            ValueType::Integer => "integer",
            ValueType::Real => "real",
            ValueType::Boolean => "boolean",
            ValueType::TextList => "text_list",
        };
        f.write_str(s)
    }
}

/// A property value. Serialized as the plain JSON scalar or string array.
///
/// Equality and ordering are total: reals compare with `f64::total_cmp`,
/// and values of different types order by type.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PropertyValue {
    Boolean(bool),
    Integer(i64),
    Real(f64),
    Text(String),
    TextList(Vec<String>),
}

impl PropertyValue {
    pub fn value_type(&self) -> ValueType {
        match self {
            PropertyValue::Boolean(_) => ValueType::Boolean,
            PropertyValue::Integer(_) => ValueType::Integer,
            PropertyValue::Real(_) => ValueType::Real,
            PropertyValue::Text(_) => ValueType::Text,
            PropertyValue::TextList(_) => ValueType::TextList,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            PropertyValue::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_integer(&self) -> Option<i64> {
        match self {
            PropertyValue::Integer(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_real(&self) -> Option<f64> {
        match self {
            PropertyValue::Real(r) => Some(*r),
            PropertyValue::Integer(i) => Some(*i as f64),
            _ => None,
        }
    }

    /// Human-facing rendering: text as-is, lists joined with "; ".
    pub fn display_text(&self) -> String {
        match self {
            PropertyValue::Boolean(b) => b.to_string(),
            PropertyValue::Integer(i) => i.to_string(),
            PropertyValue::Real(r) => r.to_string(),
            PropertyValue::Text(s) => s.clone(),
            PropertyValue::TextList(l) => l.join("; "),
        }
    }

    fn type_rank(&self) -> u8 {
        match self {
            PropertyValue::Boolean(_) => 0,
            PropertyValue::Integer(_) => 1,
            PropertyValue::Real(_) => 2,
            PropertyValue::Text(_) => 3,
            PropertyValue::TextList(_) => 4,
        }
    }
}

impl PartialEq for PropertyValue {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for PropertyValue {}

impl PartialOrd for PropertyValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PropertyValue {
    fn cmp(&self, other: &Self) -> Ordering {
        use PropertyValue::*;
        match (self, other) {
            (Boolean(a), Boolean(b)) => a.cmp(b),
            (Integer(a), Integer(b)) => a.cmp(b),
            (Real(a), Real(b)) => a.total_cmp(b),
            (Text(a), Text(b)) => a.cmp(b),
            (TextList(a), TextList(b)) => a.cmp(b),
            _ => self.type_rank().cmp(&other.type_rank()),
        }
    }
}

impl From<&str> for PropertyValue {
    fn from(s: &str) -> Self {
        PropertyValue::Text(s.to_string())
    }
}

impl From<String> for PropertyValue {
    fn from(s: String) -> Self {
        PropertyValue::Text(s)
    }
}

impl From<i64> for PropertyValue {
    fn from(i: i64) -> Self {
        PropertyValue::Integer(i)
    }
}

impl From<f64> for PropertyValue {
    fn from(r: f64) -> Self {
        PropertyValue::Real(r)
    }
}

impl From<Vec<String>> for PropertyValue {
    fn from(items: Vec<String>) -> Self {
        PropertyValue::TextList(items)
    }
}

impl From<bool> for PropertyValue {
    fn from(b: bool) -> Self {
        PropertyValue::Boolean(b)
    }
}

pub type PropertyMap = BTreeMap<String, PropertyValue>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeRole {
    Fact,
    Dimension,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactNode {
    pub id: NodeId,
    pub label: String,
    pub properties: PropertyMap,
}

impl FactNode {
    pub fn new(id: NodeId, label: impl Into<String>, properties: PropertyMap) -> Self {
        FactNode {
            id,
            label: label.into(),
            properties,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimensionNode {
    pub id: NodeId,
    pub label: String,
    pub owner: NodeId,
    /// Position within the extraction batch that produced it; keeps
    /// extraction order recoverable after ids (hashes) scramble it.
    pub ordinal: u32,
    pub properties: PropertyMap,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Node {
    Fact(FactNode),
    Dimension(DimensionNode),
}

impl Node {
    pub fn id(&self) -> NodeId {
        match self {
            Node::Fact(f) => f.id,
            Node::Dimension(d) => d.id,
        }
    }

    pub fn label(&self) -> &str {
        match self {
            Node::Fact(f) => &f.label,
            Node::Dimension(d) => &d.label,
        }
    }

    pub fn role(&self) -> NodeRole {
        match self {
            Node::Fact(_) => NodeRole::Fact,
            Node::Dimension(_) => NodeRole::Dimension,
        }
    }

    pub fn properties(&self) -> &PropertyMap {
        match self {
            Node::Fact(f) => &f.properties,
            Node::Dimension(d) => &d.properties,
        }
    }

    pub fn property(&self, key: &str) -> Option<&PropertyValue> {
        self.properties().get(key)
    }

    pub fn owner(&self) -> Option<NodeId> {
        match self {
            Node::Fact(_) => None,
            Node::Dimension(d) => Some(d.owner),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EdgeKind {
    HasDimension,
    NavigatesTo,
}

impl EdgeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeKind::HasDimension => "HAS_DIMENSION",
            EdgeKind::NavigatesTo => "NAVIGATES_TO",
        }
    }

    pub const ALL: [EdgeKind; 2] = [EdgeKind::HasDimension, EdgeKind::NavigatesTo];
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Out,
    In,
    Both,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub source: NodeId,
    pub target: NodeId,
    pub kind: EdgeKind,
    #[serde(default)]
    pub properties: PropertyMap,
}
