//! Executing a workflow over one document and writing the result to the graph.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::rule::{rule_extract, RuleError};
use super::schema::{validate_output, OutputKind, OutputSchema, TypedOutput};
use super::workflow::{Extractor, WorkflowSpec, TITLE_FIELD};
use super::{InspectionError, Result};
use crate::graph::{FactNode, GraphStore, NodeId, PropertyMap, PropertyValue};
use crate::ingest::{
    build_index, chunk_text, extract_text, ChunkCache, ChunkIndex, ChunkParams, MinimalPdfExtractor,
    PdfTextExtractor, RawDocument,
};
use crate::navigation::canonical_id;
use crate::par::Exec;
use crate::providers::{CompletionRequest, Embedder, HashEmbedder, ProviderRegistry, UpstreamOutput};

/// Shared, thread-safe services an inspection run draws on.
#[derive(Clone)]
pub struct Services {
    pub providers: Arc<ProviderRegistry>,
    pub embedder: Arc<dyn Embedder>,
    pub pdf: Arc<dyn PdfTextExtractor>,
    pub chunking: ChunkParams,
    pub cache: Option<ChunkCache>,
}

impl Services {
    /// Hash embedder, bundled PDF reader, default chunking, no cache.
    pub fn new(providers: ProviderRegistry) -> Self {
        Services {
            providers: Arc::new(providers),
            embedder: Arc::new(HashEmbedder::default()),
            pdf: Arc::new(MinimalPdfExtractor),
            chunking: ChunkParams::default(),
            cache: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum NodeStatus {
    Ok,
    Failed { reason: String },
    Skipped { reason: String },
}

impl NodeStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, NodeStatus::Ok)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InspectionOutput {
    pub doc_id: String,
    /// Attributes for the Fact node: declared fields found in the document
    /// metadata, overlaid with single-typed subnode outputs.
    pub fact_properties: PropertyMap,
    /// Subnode name to items, for every dimension-producing subnode that
    /// completed.
    pub dimensions: BTreeMap<String, Vec<PropertyMap>>,
    pub status: BTreeMap<String, NodeStatus>,
}

impl InspectionOutput {
    pub fn title(&self) -> Option<&str> {
        self.fact_properties.get(TITLE_FIELD).and_then(PropertyValue::as_text)
    }
}

/// Lazily built chunk index, shared by the model subnodes of one document.
struct LazyIndex<'a> {
    doc_id: &'a str,
    text: &'a str,
    services: &'a Services,
    built: Option<std::result::Result<ChunkIndex, String>>,
}

impl LazyIndex<'_> {
    fn get(&mut self) -> std::result::Result<&ChunkIndex, String> {
        if self.built.is_none() {
            self.built = Some(self.build());
        }
        self.built.as_ref().expect("just built").as_ref().map_err(Clone::clone)
    }

    fn build(&self) -> std::result::Result<ChunkIndex, String> {
        let embedder = self.services.embedder.as_ref();
        if let Some(cache) = &self.services.cache {
            if let Ok(Some(index)) = cache.load(self.doc_id, embedder) {
                return Ok(index);
            }
        }
        let chunks = chunk_text(self.doc_id, self.text, self.services.chunking).map_err(|e| e.to_string())?;
        let index = build_index(chunks, embedder).map_err(|e| e.to_string())?;
        if let Some(cache) = &self.services.cache {
            // a failed cache write only costs a rebuild next time
            let _ = cache.store(&index, embedder);
        }
        Ok(index)
    }
}

/// Values of declared fact fields found in extraction metadata, coerced to
/// their declared types; unusable values are ignored.
fn metadata_properties(spec: &WorkflowSpec, metadata: &BTreeMap<String, Value>) -> PropertyMap {
    let mut out = PropertyMap::new();
    for (key, prop) in &spec.fact.fields {
        let Some(value) = metadata.get(key) else { continue };
        let one = OutputSchema::of(OutputKind::SingleTyped, &[(key.as_str(), prop.value_type)]);
        let wrapped = Value::Object([(key.clone(), value.clone())].into_iter().collect());
        if let Ok(TypedOutput::Single(mut m)) = validate_output(&wrapped, &one) {
            if let Some(v) = m.remove(key) {
                out.insert(key.clone(), v);
            }
        }
    }
    out
}

fn first_line(text: &str) -> Option<String> {
    text.lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .map(|l| l.chars().take(300).collect())
}

/// Runs every subnode of `spec` over `doc` in topological order.
///
/// A subnode whose direct predecessor did not complete is skipped, so a
/// failure silences all of its descendants while unrelated branches run.
pub fn run_inspection(doc: &RawDocument, spec: &WorkflowSpec, services: &Services) -> Result<InspectionOutput> {
    let extracted = extract_text(doc, services.pdf.as_ref()).map_err(|e| InspectionError::DocumentUnreadable {
        doc_id: doc.doc_id.clone(),
        reason: e.to_string(),
    })?;
    if extracted.text.trim().is_empty() {
        return Err(InspectionError::DocumentUnreadable {
            doc_id: doc.doc_id.clone(),
            reason: "document has no text".into(),
        });
    }
    let text = extracted.text.as_str();
    let mut index = LazyIndex {
        doc_id: &doc.doc_id,
        text,
        services,
        built: None,
    };
    let mut status: BTreeMap<String, NodeStatus> = BTreeMap::new();
    let mut outputs: BTreeMap<usize, TypedOutput> = BTreeMap::new();

    for &i in spec.order() {
        let node = &spec.nodes[i];
        let preds = spec.predecessors(i);
        if let Some(&blocked) = preds.iter().find(|p| !outputs.contains_key(p)) {
            status.insert(
                node.name.clone(),
                NodeStatus::Skipped {
                    reason: format!("upstream {:?} did not complete", spec.nodes[blocked].name),
                },
            );
            continue;
        }
        let result = match &node.extractor {
            Extractor::Rule(rule) => rule_extract(text, rule, &node.output_schema)
                .map_err(|RuleError::NoMatch| "no-match".to_string())
                .and_then(|raw| validate_output(&raw, &node.output_schema).map_err(|e| e.to_string())),
            Extractor::Model { model_id, query } => index.get().and_then(|idx| {
                let chunks = idx
                    .retrieve(query, node.retrieval_k, services.embedder.as_ref())
                    .map_err(|e| e.to_string())?;
                let mut request = CompletionRequest::new(model_id.clone(), query.clone())
                    .for_task(doc.doc_id.clone(), node.name.clone())
                    .with_schema(node.output_schema.clone())
                    .with_context(chunks.into_iter().map(|c| c.text).collect());
                request.upstream = preds
                    .iter()
                    .map(|p| UpstreamOutput {
                        name: spec.nodes[*p].name.clone(),
                        text: serde_json::to_string(&outputs[p]).unwrap_or_default(),
                    })
                    .collect();
                let result = services.providers.complete(&request).map_err(|e| e.to_string())?;
                result.parsed.ok_or_else(|| "provider returned no structured output".to_string())
            }),
        };
        match result {
            Ok(out) => {
                status.insert(node.name.clone(), NodeStatus::Ok);
                outputs.insert(i, out);
            }
            Err(reason) => {
                status.insert(node.name.clone(), NodeStatus::Failed { reason });
            }
        }
    }

    let mut fact_properties = metadata_properties(spec, &extracted.metadata);
    let mut dimensions = BTreeMap::new();
    for &i in spec.order() {
        let node = &spec.nodes[i];
        let Some(out) = outputs.remove(&i) else { continue };
        match out {
            TypedOutput::Single(m) if !node.as_node => fact_properties.extend(m),
            other => {
                dimensions.insert(node.name.clone(), other.items().to_vec());
            }
        }
    }
    if !fact_properties.contains_key(TITLE_FIELD) {
        if let Some(line) = first_line(text) {
            fact_properties.insert(TITLE_FIELD.to_string(), PropertyValue::Text(line));
        }
    }
    Ok(InspectionOutput {
        doc_id: doc.doc_id.clone(),
        fact_properties,
        dimensions,
        status,
    })
}

/// Inspects many documents, concurrently under [`Exec::Parallel`]. Results
/// are in input order.
pub fn inspect_batch(
    docs: &[RawDocument],
    spec: &WorkflowSpec,
    services: &Services,
    exec: Exec,
) -> Vec<Result<InspectionOutput>> {
    exec.map(docs, |d| run_inspection(d, spec, services))
}

/// Ids written by [`materialize`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Materialized {
    pub fact: NodeId,
    pub dimensions: Vec<NodeId>,
}

/// Writes an inspection result to the graph: the Fact node keyed by its
/// canonical title id, then the Dimension nodes in subnode order.
pub fn materialize(store: &mut GraphStore, spec: &WorkflowSpec, output: &InspectionOutput) -> Result<Materialized> {
    let title = output.title().ok_or_else(|| InspectionError::MissingTitle(output.doc_id.clone()))?;
    let id = canonical_id(title).map_err(|_| InspectionError::MissingTitle(output.doc_id.clone()))?;
    store.upsert_fact(FactNode::new(id, spec.fact.label.clone(), output.fact_properties.clone()))?;
    let mut dimensions = Vec::new();
    for &i in spec.order() {
        let node = &spec.nodes[i];
        if let Some(items) = output.dimensions.get(&node.name) {
            dimensions.extend(store.add_dimensions(id, &node.label, items.clone())?);
        }
    }
    Ok(Materialized { fact: id, dimensions })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphStore;
    use crate::ingest::DocKind;
    use crate::inspection::parse_workflow;
    use crate::inspection::workflow::tests::paper_snippet;
    use crate::providers::{CompletionProvider, ProviderError, ScriptedProvider, ScriptedResponse};
    use proptest::prelude::*;
    use serde_json::json;
    use std::sync::Mutex;

    const DOC: &str = "Sharded Graph Pipelines\n\nAbstract\nWe build graphs at scale.\n\n1 Introduction\n\
        A key challenge is memory. Another challenge is skew. We solve memory with sharding.\n";

    fn doc() -> RawDocument {
        RawDocument::new("P1", DocKind::Plaintext, DOC)
    }

    fn scripted(challenges: Option<&str>) -> ProviderRegistry {
        let out = |v: serde_json::Value| Some(v);
        let mut responses = vec![ScriptedResponse {
            doc_id: "P1".into(),
            task: "Solutions".into(),
            output: out(json!([{"summary": "sharding"}, {"summary": "rebalancing"}])),
            error: None,
        }];
        responses.push(ScriptedResponse {
            doc_id: "P1".into(),
            task: "Challenges".into(),
            output: challenges.is_none().then(|| json!([{"summary": "memory"}, {"summary": "skew"}])),
            error: challenges.map(str::to_string),
        });
        let mut reg = ProviderRegistry::new();
        reg.register("", Arc::new(ScriptedProvider::new(responses).unwrap())).unwrap();
        reg
    }

    #[test]
    fn paper_snippet_end_to_end() {
        let spec = parse_workflow(&paper_snippet()).unwrap();
        let services = Services::new(scripted(None));
        let out = run_inspection(&doc(), &spec, &services).unwrap();
        assert_eq!(out.fact_properties["abstract"], PropertyValue::from("We build graphs at scale."));
        assert_eq!(out.title(), Some("Sharded Graph Pipelines"));
        assert_eq!(out.dimensions["Challenges"].len(), 2);
        assert_eq!(out.dimensions["Solutions"].len(), 2);
        assert!(out.status.values().all(NodeStatus::is_ok));
        // byte-identical on a rerun
        let again = run_inspection(&doc(), &spec, &services).unwrap();
        assert_eq!(serde_json::to_string(&out).unwrap(), serde_json::to_string(&again).unwrap());

        let mut store = GraphStore::in_memory(spec.graph_schema().unwrap());
        let m = materialize(&mut store, &spec, &out).unwrap();
        assert_eq!(m.dimensions.len(), 4);
        assert_eq!(store.graph().dimensions_of(m.fact, "Challenge").len(), 2);
        let again = materialize(&mut store, &spec, &out).unwrap();
        assert_eq!(again, m);
        assert_eq!(store.graph().node_count(), 5);
    }

    #[test]
    fn failure_skips_descendants_only() {
        let spec = parse_workflow(&paper_snippet()).unwrap();
        let services = Services::new(scripted(Some("model offline")));
        let out = run_inspection(&doc(), &spec, &services).unwrap();
        assert!(out.status["Abstract"].is_ok());
        assert!(matches!(&out.status["Challenges"], NodeStatus::Failed { reason } if reason.contains("model offline")));
        assert!(matches!(out.status["Solutions"], NodeStatus::Skipped { .. }));
        assert!(out.dimensions.is_empty());
    }

    #[test]
    fn empty_workflow_runs_nothing() {
        let spec = parse_workflow(r#"{"dag": {"nodes": []}}"#).unwrap();
        let out = run_inspection(&doc(), &spec, &Services::new(ProviderRegistry::new())).unwrap();
        assert!(out.status.is_empty());
        assert!(out.dimensions.is_empty());
    }

    #[test]
    fn unreadable_document() {
        let spec = parse_workflow(&paper_snippet()).unwrap();
        let bad = RawDocument::new("X", DocKind::Pdf, b"not a pdf".to_vec());
        assert!(matches!(
            run_inspection(&bad, &spec, &Services::new(scripted(None))),
            Err(InspectionError::DocumentUnreadable { .. })
        ));
    }

    /// Records every request it answers.
    struct Recorder(Mutex<Vec<CompletionRequest>>);

    impl CompletionProvider for Recorder {
        fn id(&self) -> &str {
            "recorder"
        }
        fn complete(&self, req: &CompletionRequest) -> std::result::Result<String, ProviderError> {
            self.0.lock().unwrap().push(req.clone());
            Ok(format!(r#"[{{"summary": "from {}"}}]"#, req.task))
        }
    }

    #[test]
    fn model_nodes_get_chunks_and_upstream() {
        let spec = parse_workflow(&paper_snippet()).unwrap();
        let recorder = Arc::new(Recorder(Mutex::new(Vec::new())));
        let mut reg = ProviderRegistry::new();
        reg.register("", recorder.clone()).unwrap();
        run_inspection(&doc(), &spec, &Services::new(reg)).unwrap();
        let seen = recorder.0.lock().unwrap();
        assert_eq!(seen.len(), 2);
        assert_eq!(seen[0].task, "Challenges");
        assert!(seen[0].upstream.is_empty());
        assert!(!seen[0].context_chunks.is_empty());
        assert_eq!(seen[1].upstream.len(), 1);
        assert_eq!(seen[1].upstream[0].name, "Challenges");
        assert_eq!(seen[1].upstream[0].text, r#"[{"summary":"from Challenges"}]"#);
    }

    #[test]
    fn metadata_fills_declared_fields() {
        let spec = parse_workflow(&paper_snippet()).unwrap();
        let body = json!({"title": "Meta Title", "year": "2023", "citation_count": 7, "venue": "X",
                          "body": "Abstract\nShort.\n1 Introduction\nchallenge text"});
        let d = RawDocument::new("P1", DocKind::StructuredJson, body.to_string());
        let out = run_inspection(&d, &spec, &Services::new(scripted(None))).unwrap();
        assert_eq!(out.fact_properties["title"], PropertyValue::from("Meta Title"));
        assert_eq!(out.fact_properties["year"], PropertyValue::Integer(2023));
        assert_eq!(out.fact_properties["citation_count"], PropertyValue::Integer(7));
        assert!(!out.fact_properties.contains_key("venue"));
    }

    fn rule_dag(n: usize, edges: &[(usize, usize)], failing: &[bool]) -> String {
        let nodes: Vec<serde_json::Value> = (0..n)
            .map(|i| {
                let word = if failing[i] { "absent" } else { "present" };
                json!({"name": format!("N{i}"), "extract_from": {"pattern": format!("(?P<f{i}>{word})")},
                       "output_schema": {"single_typed": {"fields": {format!("f{i}"): "text"}}}})
            })
            .collect();
        let edges: Vec<serde_json::Value> = edges
            .iter()
            .map(|(s, t)| json!({"source": format!("N{s}"), "target": format!("N{t}")}))
            .collect();
        json!({"dag": {"nodes": nodes, "edges": edges}}).to_string()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn skip_monotonicity(
            (n, edges, failing) in (1usize..=12).prop_flat_map(|n| (
                Just(n),
                // forward edges only, so the graph is acyclic
                proptest::collection::vec((0..n, 0..n), 0..24)
                    .prop_map(|es| es.into_iter().filter(|(a, b)| a < b).collect::<Vec<_>>()),
                proptest::collection::vec(proptest::bool::weighted(0.25), n),
            ))
        ) {
            let spec = parse_workflow(&rule_dag(n, &edges, &failing)).unwrap();
            let d = RawDocument::new("D", DocKind::Plaintext, "present");
            let out = run_inspection(&d, &spec, &Services::new(ProviderRegistry::new())).unwrap();
            // oracle: a node is blocked if any ancestor failed or is blocked
            let mut blocked = vec![false; n];
            for v in 0..n {
                blocked[v] = edges.iter().any(|&(s, t)| t == v && (blocked[s] || failing[s]));
            }
            for v in 0..n {
                let st = &out.status[&format!("N{v}")];
                let expected = if blocked[v] { "skipped" } else if failing[v] { "failed" } else { "ok" };
                let got = match st { NodeStatus::Ok => "ok", NodeStatus::Failed { .. } => "failed", NodeStatus::Skipped { .. } => "skipped" };
                prop_assert_eq!(got, expected, "node {}", v);
            }
        }
    }
}
