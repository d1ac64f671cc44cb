use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::schema::GraphSchema;
use super::store::Graph;
use super::types::{
    DimensionNode, EdgeKind, FactNode, Node, NodeId, NodeRole, PropertyMap, PropertyValue,
};
use super::{GraphError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Jsonl,
    CsvImport,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Record {
    Node(NodeRecord),
    Edge(EdgeRecord),
}

#[derive(Serialize, Deserialize)]
struct NodeRecord {
    id: NodeId,
    role: NodeRole,
    label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    owner: Option<NodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ordinal: Option<u32>,
    properties: PropertyMap,
}

#[derive(Serialize, Deserialize)]
struct EdgeRecord {
    #[serde(rename = "type")]
    kind: EdgeKind,
    source: NodeId,
    target: NodeId,
    #[serde(default)]
    properties: PropertyMap,
}

/// One JSON record per node (id order) then per edge (kind, source, target
/// order).
pub(crate) fn write_jsonl<W: Write>(graph: &Graph, w: &mut W) -> std::io::Result<()> {
    for node in graph.nodes() {
        let record = match node {
            Node::Fact(f) => NodeRecord {
                id: f.id,
                role: NodeRole::Fact,
                label: f.label.clone(),
                owner: None,
                ordinal: None,
                properties: f.properties.clone(),
            },
            Node::Dimension(d) => NodeRecord {
                id: d.id,
                role: NodeRole::Dimension,
                label: d.label.clone(),
                owner: Some(d.owner),
                ordinal: Some(d.ordinal),
                properties: d.properties.clone(),
            },
        };
        serde_json::to_writer(&mut *w, &Record::Node(record)).map_err(std::io::Error::other)?;
        w.write_all(b"\n")?;
    }
    for edge in graph.edges() {
        let record = EdgeRecord {
            kind: edge.kind,
            source: edge.source,
            target: edge.target,
            properties: edge.properties.clone(),
        };
        serde_json::to_writer(&mut *w, &Record::Edge(record)).map_err(std::io::Error::other)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub(crate) fn import_jsonl_into<R: BufRead>(graph: &mut Graph, reader: R) -> Result<()> {
    let mut facts = Vec::new();
    let mut dims = Vec::new();
    let mut edges = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(&line)
            .map_err(|e| GraphError::Corrupt(format!("jsonl line {}: {e}", i + 1)))?;
        match record {
            Record::Node(n) => match (n.role, n.owner) {
                (NodeRole::Fact, None) => facts.push(FactNode::new(n.id, n.label, n.properties)),
                (NodeRole::Dimension, Some(owner)) => dims.push(DimensionNode {
                    id: n.id,
                    label: n.label,
                    owner,
                    ordinal: n.ordinal.unwrap_or(0),
                    properties: n.properties,
                }),
                _ => {
                    return Err(GraphError::Corrupt(format!(
                        "jsonl line {}: role/owner mismatch",
                        i + 1
                    )))
                }
            },
            Record::Edge(e) => edges.push(e),
        }
    }
    for f in facts {
        graph.insert_node(Node::Fact(f))?;
    }
    for d in dims {
        graph.insert_node(Node::Dimension(d))?;
    }
    for e in edges {
        match e.kind {
            EdgeKind::HasDimension => {
                let ok = graph
                    .node(e.target)
                    .and_then(Node::owner)
                    .is_some_and(|owner| owner == e.source);
                if !ok {
                    return Err(GraphError::Corrupt(format!(
                        "HAS_DIMENSION {} -> {} has no matching dimension node",
                        e.source, e.target
                    )));
                }
            }
            EdgeKind::NavigatesTo => {
                graph.link_facts(e.source, e.target)?;
            }
        }
    }
    Ok(())
}

/// Rebuilds a graph from JSONL records under `schema`.
pub fn import_jsonl<R: BufRead>(reader: R, schema: GraphSchema) -> Result<Graph> {
    let mut graph = Graph::new(schema);
    import_jsonl_into(&mut graph, reader)?;
    Ok(graph)
}

/// Writes `graph.jsonl` into `dir`.
pub fn export_jsonl(graph: &Graph, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let path = dir.join("graph.jsonl");
    let mut w = BufWriter::new(File::create(&path)?);
    write_jsonl(graph, &mut w)?;
    w.flush()?;
    Ok(vec![path])
}

/// Writes bulk-import CSVs into `dir`: `vertex_<label>.csv` for every schema
/// label and `edge_<KIND>.csv` for every edge kind, each with a header row.
pub fn export_csv(graph: &Graph, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (label, schema) in &graph.schema().labels {
        let path = dir.join(format!("vertex_{label}.csv"));
        let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
        let keys: Vec<&String> = schema.properties.keys().collect();
        let mut header = vec!["id".to_string()];
        if schema.role == NodeRole::Dimension {
            header.push("owner".into());
            header.push("ordinal".into());
        }
        header.extend(keys.iter().map(|k| k.to_string()));
        w.write_record(&header).map_err(csv_err)?;
        for id in graph.ids_with_label(label) {
            let node = graph.node(id).expect("label index points at live nodes");
            let mut row = vec![id.to_hex()];
            if let Node::Dimension(d) = node {
                row.push(d.owner.to_hex());
                row.push(d.ordinal.to_string());
            }
            for key in &keys {
                row.push(node.property(key).map(csv_cell).unwrap_or_default());
            }
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush()?;
        written.push(path);
    }
    let kinds: BTreeSet<EdgeKind> = graph.schema().edge_kinds.clone();
    for kind in kinds {
        let path = dir.join(format!("edge_{}.csv", kind.as_str()));
        let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
        w.write_record(["source", "target"]).map_err(csv_err)?;
        for edge in graph.edges().filter(|e| e.kind == kind) {
            w.write_record([edge.source.to_hex(), edge.target.to_hex()])
                .map_err(csv_err)?;
        }
        w.flush()?;
        written.push(path);
    }
    Ok(written)
}

fn csv_cell(value: &PropertyValue) -> String {
    match value {
        PropertyValue::TextList(items) => serde_json::to_string(items).unwrap_or_default(),
        other => other.display_text(),
    }
}

fn csv_err(e: csv::Error) -> GraphError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => GraphError::Io(io),
        other => GraphError::Corrupt(format!("csv: {other:?}")),
    }
}
