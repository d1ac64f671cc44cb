use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::export::{import_jsonl_into, write_jsonl};
use super::filter::Predicate;
use super::schema::GraphSchema;
use super::types::{
    DimensionNode, Direction, Edge, EdgeKind, FactNode, Node, NodeId, NodeRole, PropertyMap,
};
use super::{GraphError, Result};
use crate::par::Exec;

/// One logged mutation. Replaying a log reproduces the graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Op {
    UpsertFact {
        node: FactNode,
    },
    AddDimensions {
        owner: NodeId,
        label: String,
        items: Vec<PropertyMap>,
    },
    LinkFacts {
        source: NodeId,
        target: NodeId,
    },
}

type EdgeKey = (EdgeKind, NodeId, NodeId);

/// In-memory Fact/Dimension graph with label and adjacency indexes.
#[derive(Debug, Clone, Default)]
pub struct Graph {
    schema: GraphSchema,
    nodes: BTreeMap<NodeId, Node>,
    by_label: BTreeMap<String, BTreeSet<NodeId>>,
    edges: BTreeMap<EdgeKey, Edge>,
    out_adj: BTreeMap<NodeId, BTreeSet<(EdgeKind, NodeId)>>,
    in_adj: BTreeMap<NodeId, BTreeSet<(EdgeKind, NodeId)>>,
}

impl Graph {
    pub fn new(schema: GraphSchema) -> Self {
        Graph {
            schema,
            ..Graph::default()
        }
    }

    pub fn schema(&self) -> &GraphSchema {
        &self.schema
    }

    pub fn extend_schema(&mut self, other: &GraphSchema) -> Result<()> {
        self.schema.merge(other)
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.nodes.get(&id)
    }

    pub fn fact(&self, id: NodeId) -> Option<&FactNode> {
        match self.nodes.get(&id) {
            Some(Node::Fact(f)) => Some(f),
            _ => None,
        }
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.nodes.contains_key(&id)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Nodes in id order.
    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    /// Edges ordered by (kind, source, target).
    pub fn edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.values()
    }

    pub fn has_edge(&self, kind: EdgeKind, source: NodeId, target: NodeId) -> bool {
        self.edges.contains_key(&(kind, source, target))
    }

    /// Ids carrying `label`, ascending. Empty for labels with no nodes.
    pub fn ids_with_label(&self, label: &str) -> Vec<NodeId> {
        self.by_label
            .get(label)
            .map(|s| s.iter().copied().collect())
            .unwrap_or_default()
    }

    pub fn count_with_label(&self, label: &str) -> usize {
        self.by_label.get(label).map_or(0, BTreeSet::len)
    }

    /// Inserts or merges a Fact node. Existing properties are overwritten
    /// key by key; keys absent from `node` are kept.
    pub fn upsert_fact(&mut self, node: FactNode) -> Result<NodeId> {
        if node.label.is_empty() {
            return Err(GraphError::schema("", "empty label"));
        }
        let merged = match self.nodes.get(&node.id) {
            Some(Node::Dimension(_)) => {
                return Err(GraphError::KindViolation(format!(
                    "{} is a dimension node",
                    node.id
                )))
            }
            Some(Node::Fact(existing)) => {
                if existing.label != node.label {
                    return Err(GraphError::schema(
                        &node.label,
                        format!("node {} already carries label {:?}", node.id, existing.label),
                    ));
                }
                let mut props = existing.properties.clone();
                props.extend(node.properties);
                FactNode { properties: props, ..node }
            }
            None => node,
        };
        self.schema
            .validate(&merged.label, NodeRole::Fact, &merged.properties)?;
        let id = merged.id;
        self.by_label
            .entry(merged.label.clone())
            .or_default()
            .insert(id);
        self.nodes.insert(id, Node::Fact(merged));
        Ok(id)
    }

    /// Stable id of a Dimension node: a hash of its owner, label, position in
    /// the batch and content. Re-adding the same batch is therefore an upsert.
    pub fn dimension_id(owner: NodeId, label: &str, ordinal: u32, props: &PropertyMap) -> NodeId {
        let content = serde_json::to_string(props).unwrap_or_default();
        let key = format!("dim\u{0}{owner}\u{0}{label}\u{0}{ordinal}\u{0}{content}");
        NodeId::from_key(key.as_bytes())
    }

    /// One Dimension node plus one HAS_DIMENSION edge per item, ids in input
    /// order. All items are validated before anything is inserted.
    pub fn add_dimensions(
        &mut self,
        owner: NodeId,
        label: &str,
        items: Vec<PropertyMap>,
    ) -> Result<Vec<NodeId>> {
        match self.nodes.get(&owner) {
            Some(Node::Fact(_)) => {}
            _ => return Err(GraphError::UnknownOwner(owner)),
        }
        for item in &items {
            self.schema.validate(label, NodeRole::Dimension, item)?;
        }
        let mut ids = Vec::with_capacity(items.len());
        for (ordinal, properties) in items.into_iter().enumerate() {
            let ordinal = ordinal as u32;
            let id = Self::dimension_id(owner, label, ordinal, &properties);
            self.by_label.entry(label.to_string()).or_default().insert(id);
            self.nodes.insert(
                id,
                Node::Dimension(DimensionNode {
                    id,
                    label: label.to_string(),
                    owner,
                    ordinal,
                    properties,
                }),
            );
            self.insert_edge(EdgeKind::HasDimension, owner, id);
            ids.push(id);
        }
        Ok(ids)
    }

    /// Adds (or finds) the NAVIGATES_TO edge between two Fact nodes.
    pub fn link_facts(&mut self, source: NodeId, target: NodeId) -> Result<Edge> {
        for id in [source, target] {
            match self.nodes.get(&id) {
                None => return Err(GraphError::UnknownNode(id)),
                Some(Node::Dimension(_)) => {
                    return Err(GraphError::KindViolation(format!(
                        "NAVIGATES_TO endpoint {id} is a dimension node"
                    )))
                }
                Some(Node::Fact(_)) => {}
            }
        }
        Ok(self.insert_edge(EdgeKind::NavigatesTo, source, target))
    }

    fn insert_edge(&mut self, kind: EdgeKind, source: NodeId, target: NodeId) -> Edge {
        let edge = self
            .edges
            .entry((kind, source, target))
            .or_insert_with(|| Edge {
                source,
                target,
                kind,
                properties: PropertyMap::new(),
            })
            .clone();
        self.out_adj.entry(source).or_default().insert((kind, target));
        self.in_adj.entry(target).or_default().insert((kind, source));
        edge
    }

    /// Neighbor ids over edges of `kind`, sorted, without duplicates.
    pub fn neighbors(&self, id: NodeId, kind: EdgeKind, direction: Direction) -> Result<Vec<NodeId>> {
        if !self.nodes.contains_key(&id) {
            return Err(GraphError::UnknownNode(id));
        }
        let mut out = BTreeSet::new();
        let collect = |adj: &BTreeMap<NodeId, BTreeSet<(EdgeKind, NodeId)>>, out: &mut BTreeSet<NodeId>| {
            if let Some(set) = adj.get(&id) {
                out.extend(set.iter().filter(|(k, _)| *k == kind).map(|(_, n)| *n));
            }
        };
        if matches!(direction, Direction::Out | Direction::Both) {
            collect(&self.out_adj, &mut out);
        }
        if matches!(direction, Direction::In | Direction::Both) {
            collect(&self.in_adj, &mut out);
        }
        Ok(out.into_iter().collect())
    }

    /// Dimension nodes of `owner` with `label`, in extraction order.
    pub fn dimensions_of(&self, owner: NodeId, label: &str) -> Vec<&DimensionNode> {
        let mut dims: Vec<&DimensionNode> = self
            .out_adj
            .get(&owner)
            .into_iter()
            .flatten()
            .filter(|(k, _)| *k == EdgeKind::HasDimension)
            .filter_map(|(_, id)| match self.nodes.get(id) {
                Some(Node::Dimension(d)) if d.label == label => Some(d),
                _ => None,
            })
            .collect();
        dims.sort_by_key(|d| (d.ordinal, d.id));
        dims
    }

    /// Every node of `label` satisfying `predicate`, in id order.
    pub fn scan<'a>(
        &'a self,
        label: &str,
        predicate: &'a Predicate,
    ) -> Result<impl Iterator<Item = &'a Node> + 'a> {
        if self.schema.label(label).is_none() {
            return Err(GraphError::UnknownLabel(label.to_string()));
        }
        let ids = self.by_label.get(label);
        Ok(ids
            .into_iter()
            .flatten()
            .filter_map(move |id| self.nodes.get(id))
            .filter(move |n| predicate.matches(n)))
    }

    /// [`Graph::scan`] collected under an execution policy.
    pub fn scan_with(&self, label: &str, predicate: &Predicate, exec: Exec) -> Result<Vec<&Node>> {
        if self.schema.label(label).is_none() {
            return Err(GraphError::UnknownLabel(label.to_string()));
        }
        let ids = self.ids_with_label(label);
        let hits = exec.map(&ids, |id| {
            let node = &self.nodes[id];
            predicate.matches(node).then_some(node)
        });
        Ok(hits.into_iter().flatten().collect())
    }

    pub fn apply(&mut self, op: Op) -> Result<()> {
        match op {
            Op::UpsertFact { node } => self.upsert_fact(node).map(|_| ()),
            Op::AddDimensions {
                owner,
                label,
                items,
            } => self.add_dimensions(owner, &label, items).map(|_| ()),
            Op::LinkFacts { source, target } => self.link_facts(source, target).map(|_| ()),
        }
    }

    /// Raw insertion used by import: the node must validate, dimension
    /// owners must already be present.
    pub(crate) fn insert_node(&mut self, node: Node) -> Result<()> {
        match node {
            Node::Fact(f) => self.upsert_fact(f).map(|_| ()),
            Node::Dimension(d) => {
                match self.nodes.get(&d.owner) {
                    Some(Node::Fact(_)) => {}
                    _ => return Err(GraphError::UnknownOwner(d.owner)),
                }
                self.schema
                    .validate(&d.label, NodeRole::Dimension, &d.properties)?;
                let (id, owner) = (d.id, d.owner);
                self.by_label.entry(d.label.clone()).or_default().insert(id);
                self.nodes.insert(id, Node::Dimension(d));
                self.insert_edge(EdgeKind::HasDimension, owner, id);
                Ok(())
            }
        }
    }
}

const SCHEMA_FILE: &str = "schema.json";
const SNAPSHOT_FILE: &str = "snapshot.jsonl";
const LOG_FILE: &str = "oplog.jsonl";

/// Single-writer graph store.
///
/// Mutations go through `&mut self` and are appended to `oplog.jsonl` before
/// returning. Readers take [`GraphStore::snapshot`], an immutable `Arc` that
/// later writes never touch (the writer copies on write while snapshots are
/// alive).
#[derive(Debug)]
pub struct GraphStore {
    graph: Arc<Graph>,
    log: Option<OpLog>,
}

#[derive(Debug)]
struct OpLog {
    dir: PathBuf,
    writer: BufWriter<File>,
}

impl GraphStore {
    pub fn in_memory(schema: GraphSchema) -> Self {
        GraphStore {
            graph: Arc::new(Graph::new(schema)),
            log: None,
        }
    }

    pub fn from_graph(graph: Graph) -> Self {
        GraphStore {
            graph: Arc::new(graph),
            log: None,
        }
    }

    /// Opens (or creates) a store in `dir`, merging `schema` into the stored
    /// one, loading the last snapshot and replaying the log on top.
    ///
    /// A truncated final log line, as left by a crash mid-append, is ignored.
    pub fn open(dir: impl AsRef<Path>, schema: &GraphSchema) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        let mut merged = match fs::read_to_string(dir.join(SCHEMA_FILE)) {
            Ok(text) => serde_json::from_str::<GraphSchema>(&text)
                .map_err(|e| GraphError::Corrupt(format!("{SCHEMA_FILE}: {e}")))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => GraphSchema::new(),
            Err(e) => return Err(e.into()),
        };
        merged.merge(schema)?;
        write_atomic(&dir.join(SCHEMA_FILE), |w| {
            serde_json::to_writer_pretty(&mut *w, &merged).map_err(std::io::Error::other)?;
            w.write_all(b"\n")
        })?;

        let mut graph = Graph::new(merged);
        let snapshot = dir.join(SNAPSHOT_FILE);
        if snapshot.exists() {
            import_jsonl_into(&mut graph, BufReader::new(File::open(&snapshot)?))?;
        }
        let log_path = dir.join(LOG_FILE);
        if log_path.exists() {
            let lines: Vec<String> = BufReader::new(File::open(&log_path)?)
                .lines()
                .collect::<std::io::Result<_>>()?;
            let last = lines.len().saturating_sub(1);
            for (i, line) in lines.iter().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<Op>(line) {
                    Ok(op) => graph.apply(op)?,
                    Err(_) if i == last => break,
                    Err(e) => {
                        return Err(GraphError::Corrupt(format!("{LOG_FILE} line {}: {e}", i + 1)))
                    }
                }
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&log_path)?;
        Ok(GraphStore {
            graph: Arc::new(graph),
            log: Some(OpLog {
                dir,
                writer: BufWriter::new(file),
            }),
        })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn snapshot(&self) -> Arc<Graph> {
        Arc::clone(&self.graph)
    }

    pub fn extend_schema(&mut self, schema: &GraphSchema) -> Result<()> {
        Arc::make_mut(&mut self.graph).extend_schema(schema)?;
        if let Some(log) = &self.log {
            let merged = self.graph.schema().clone();
            write_atomic(&log.dir.join(SCHEMA_FILE), |w| {
                serde_json::to_writer_pretty(&mut *w, &merged).map_err(std::io::Error::other)?;
                w.write_all(b"\n")
            })?;
        }
        Ok(())
    }

    pub fn upsert_fact(&mut self, node: FactNode) -> Result<NodeId> {
        let op = Op::UpsertFact { node: node.clone() };
        let id = Arc::make_mut(&mut self.graph).upsert_fact(node)?;
        self.append(&op)?;
        Ok(id)
    }

    pub fn add_dimensions(
        &mut self,
        owner: NodeId,
        label: &str,
        items: Vec<PropertyMap>,
    ) -> Result<Vec<NodeId>> {
        if items.is_empty() {
            // still report a missing owner
            return match self.graph.node(owner) {
                Some(Node::Fact(_)) => Ok(Vec::new()),
                _ => Err(GraphError::UnknownOwner(owner)),
            };
        }
        let op = Op::AddDimensions {
            owner,
            label: label.to_string(),
            items: items.clone(),
        };
        let ids = Arc::make_mut(&mut self.graph).add_dimensions(owner, label, items)?;
        self.append(&op)?;
        Ok(ids)
    }

    pub fn link_facts(&mut self, source: NodeId, target: NodeId) -> Result<Edge> {
        let edge = Arc::make_mut(&mut self.graph).link_facts(source, target)?;
        self.append(&Op::LinkFacts { source, target })?;
        Ok(edge)
    }

    fn append(&mut self, op: &Op) -> Result<()> {
        if let Some(log) = &mut self.log {
            serde_json::to_writer(&mut log.writer, op).map_err(std::io::Error::other)?;
            log.writer.write_all(b"\n")?;
            log.writer.flush()?;
        }
        Ok(())
    }

    /// Writes a snapshot and truncates the log. No-op for in-memory stores.
    pub fn compact(&mut self) -> Result<()> {
        let Some(log) = &mut self.log else {
            return Ok(());
        };
        let graph = Arc::clone(&self.graph);
        write_atomic(&log.dir.join(SNAPSHOT_FILE), |w| write_jsonl(&graph, w))?;
        let file = OpenOptions::new()
            .create(true)
            .write(true)
            .truncate(true)
            .open(log.dir.join(LOG_FILE))?;
        file.sync_all()?;
        let file = OpenOptions::new().append(true).open(log.dir.join(LOG_FILE))?;
        log.writer = BufWriter::new(file);
        Ok(())
    }
}

fn write_atomic(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    let mut w = BufWriter::new(File::create(&tmp)?);
    body(&mut w)?;
    let file = w.into_inner().map_err(|e| e.into_error())?;
    file.sync_all()?;
    fs::rename(tmp, path)
}
