//! Completion and embedding backends behind one routing contract.
//!
//! Requests are routed by the longest registered prefix of their model id,
//! so `"ollama/qwen2.5:7b"` can go to a local server while everything else
//! falls through to the `""` route.

mod config;
mod embed;
mod extractive;
#[cfg(feature = "http")]
mod http;
mod scripted;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::inspection::{validate_output, OutputSchema, TypedOutput};

pub use config::{offline_from_env, EmbedderConfig, ProviderConfig, RouteConfig, RouteKind};
pub use embed::{Embedder, HashEmbedder};
pub use extractive::ExtractiveProvider;
#[cfg(feature = "http")]
pub use http::HttpProvider;
pub use scripted::{ScriptedProvider, ScriptedResponse};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("no provider registered for model {0:?}")]
    NoProvider(String),
    #[error("prefix {0:?} is already registered")]
    DuplicatePrefix(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("provider failure: {0}")]
    ProviderFailure(String),
    #[error("output does not match the schema: {0}")]
    ParseFailure(String),
    #[error("provider configuration: {0}")]
    Config(String),
}

pub type Result<T, E = ProviderError> = std::result::Result<T, E>;

/// Output of an upstream subnode handed to a downstream one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpstreamOutput {
    pub name: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub model_id: String,
    /// The subnode's query.
    pub prompt: String,
    #[serde(default)]
    pub upstream: Vec<UpstreamOutput>,
    #[serde(default)]
    pub context_chunks: Vec<String>,
    #[serde(default)]
    pub output_schema: Option<OutputSchema>,
    /// Upper bound on the answer length, in chars.
    pub max_output: usize,
    /// Document being inspected, if any. Keys scripted responses.
    #[serde(default)]
    pub doc_id: String,
    /// Name of the task (subnode name or generation stage).
    #[serde(default)]
    pub task: String,
    /// Set on the repair attempt after a parse failure.
    #[serde(default)]
    pub repair_note: Option<String>,
}

pub const DEFAULT_MAX_OUTPUT: usize = 4000;

impl CompletionRequest {
    pub fn new(model_id: impl Into<String>, prompt: impl Into<String>) -> Self {
        CompletionRequest {
            model_id: model_id.into(),
            prompt: prompt.into(),
            upstream: Vec::new(),
            context_chunks: Vec::new(),
            output_schema: None,
            max_output: DEFAULT_MAX_OUTPUT,
            doc_id: String::new(),
            task: String::new(),
            repair_note: None,
        }
    }

    pub fn for_task(mut self, doc_id: impl Into<String>, task: impl Into<String>) -> Self {
        self.doc_id = doc_id.into();
        self.task = task.into();
        self
    }

    pub fn with_schema(mut self, schema: OutputSchema) -> Self {
        self.output_schema = Some(schema);
        self
    }

    pub fn with_context(mut self, chunks: Vec<String>) -> Self {
        self.context_chunks = chunks;
        self
    }

    /// The full prompt text sent to chat-style backends: upstream outputs,
    /// then retrieved context, then the query and the answer format.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for up in &self.upstream {
            out.push_str(&format!("Output of {}: {}\n\n", up.name, up.text));
        }
        if !self.context_chunks.is_empty() {
            out.push_str("Context:\n");
            for (i, c) in self.context_chunks.iter().enumerate() {
                out.push_str(&format!("[{}] {}\n", i + 1, c.trim()));
            }
            out.push('\n');
        }
        out.push_str(&format!("Task: {}\n", self.prompt.trim()));
        if let Some(schema) = &self.output_schema {
            out.push_str(&format!("\nAnswer with {}. Output only JSON.\n", schema.describe()));
        }
        if let Some(note) = &self.repair_note {
            out.push_str(&format!("\nYour previous answer was rejected: {note}\n"));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResult {
    pub raw_text: String,
    pub parsed: Option<TypedOutput>,
    pub provider_id: String,
}

pub trait CompletionProvider: Send + Sync {
    fn id(&self) -> &str;

    /// Returns the raw answer text.
    fn complete(&self, request: &CompletionRequest) -> Result<String>;
}

/// Finds the JSON value in a model answer: the whole text, a fenced code
/// block, or the outermost bracketed span.
pub fn extract_json(raw: &str) -> Option<Value> {
    let trimmed = raw.trim();
    if let Ok(v) = serde_json::from_str(trimmed) {
        return Some(v);
    }
    if let Some(start) = trimmed.find("```") {
        let body = &trimmed[start + 3..];
        let body = body.trim_start_matches(|c: char| c.is_ascii_alphabetic());
        if let Some(end) = body.find("```") {
            if let Ok(v) = serde_json::from_str(body[..end].trim()) {
                return Some(v);
            }
        }
    }
    let open = trimmed.find(['[', '{'])?;
    let close_char = if trimmed.as_bytes()[open] == b'[' { ']' } else { '}' };
    let close = trimmed.rfind(close_char)?;
    if close <= open {
        return None;
    }
    serde_json::from_str(&trimmed[open..=close]).ok()
}

fn parse_against(raw: &str, schema: &OutputSchema) -> std::result::Result<TypedOutput, String> {
    let value = extract_json(raw).ok_or_else(|| "answer contains no JSON value".to_string())?;
    validate_output(&value, schema).map_err(|e| e.to_string())
}

/// Prefix-routed set of completion providers. Frozen once built.
#[derive(Clone, Default)]
pub struct ProviderRegistry {
    // sorted by descending prefix length, so the first match is the longest
    routes: Vec<(String, Arc<dyn CompletionProvider>)>,
}

impl std::fmt::Debug for ProviderRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_map()
            .entries(self.routes.iter().map(|(p, prov)| (p, prov.id())))
            .finish()
    }
}

impl ProviderRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers `provider` for model ids starting with `prefix`. The empty
    /// prefix is the catch-all route.
    pub fn register(&mut self, prefix: &str, provider: Arc<dyn CompletionProvider>) -> Result<()> {
        if self.routes.iter().any(|(p, _)| p == prefix) {
            return Err(ProviderError::DuplicatePrefix(prefix.to_string()));
        }
        self.routes.push((prefix.to_string(), provider));
        self.routes
            .sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
        Ok(())
    }

    pub fn route(&self, model_id: &str) -> Result<&Arc<dyn CompletionProvider>> {
        self.routes
            .iter()
            .find(|(p, _)| model_id.starts_with(p.as_str()))
            .map(|(_, prov)| prov)
            .ok_or_else(|| ProviderError::NoProvider(model_id.to_string()))
    }

    pub fn prefixes(&self) -> impl Iterator<Item = &str> {
        self.routes.iter().map(|(p, _)| p.as_str())
    }

    /// Routes and runs `request`. When an output schema is present and the
    /// answer fails to parse, retries once with the failure restated.
    pub fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult> {
        if request.model_id.trim().is_empty() {
            return Err(ProviderError::InvalidRequest("model_id is empty".into()));
        }
        if request.prompt.trim().is_empty() {
            return Err(ProviderError::InvalidRequest("prompt is empty".into()));
        }
        let provider = self.route(&request.model_id)?;
        let ask = |req: &CompletionRequest| -> Result<String> {
            let raw = provider.complete(req)?;
            if raw.trim().is_empty() {
                return Err(ProviderError::ProviderFailure(format!(
                    "{} returned an empty answer",
                    provider.id()
                )));
            }
            Ok(raw)
        };
        let raw = ask(request)?;
        let Some(schema) = &request.output_schema else {
            return Ok(CompletionResult {
                raw_text: raw,
                parsed: None,
                provider_id: provider.id().to_string(),
            });
        };
        let (raw, parsed) = match parse_against(&raw, schema) {
            Ok(parsed) => (raw, parsed),
            Err(reason) => {
                let mut retry = request.clone();
                retry.repair_note = Some(format!("{reason}. Answer with {}.", schema.describe()));
                let raw = ask(&retry)?;
                let parsed = parse_against(&raw, schema).map_err(ProviderError::ParseFailure)?;
                (raw, parsed)
            }
        };
        Ok(CompletionResult {
            raw_text: raw,
            parsed: Some(parsed),
            provider_id: provider.id().to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{PropertyValue, ValueType};
    use crate::inspection::OutputKind;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Fixed(&'static str, &'static str);

    impl CompletionProvider for Fixed {
        fn id(&self) -> &str {
            self.0
        }
        fn complete(&self, _: &CompletionRequest) -> Result<String> {
            Ok(self.1.to_string())
        }
    }

    /// Answers garbage first, then valid JSON once the repair note is set.
    struct Repairable(AtomicUsize);

    impl CompletionProvider for Repairable {
        fn id(&self) -> &str {
            "repairable"
        }
        fn complete(&self, req: &CompletionRequest) -> Result<String> {
            self.0.fetch_add(1, Ordering::SeqCst);
            Ok(if req.repair_note.is_some() {
                r#"[{"summary":"fixed"}]"#.into()
            } else {
                "I think the challenges are many.".into()
            })
        }
    }

    fn registry() -> ProviderRegistry {
        let mut r = ProviderRegistry::new();
        r.register("ollama/", Arc::new(Fixed("local", "L"))).unwrap();
        r.register("", Arc::new(Fixed("cloud", "C"))).unwrap();
        r
    }

    #[test]
    fn longest_prefix_wins() {
        let r = registry();
        assert_eq!(r.route("ollama/qwen2.5:7b").unwrap().id(), "local");
        assert_eq!(r.route("qwen-plus").unwrap().id(), "cloud");
        let res = r.complete(&CompletionRequest::new("qwen-plus", "hi")).unwrap();
        assert_eq!(res.provider_id, "cloud");
        assert_eq!(res.raw_text, "C");
        assert!(res.parsed.is_none());
    }

    #[test]
    fn no_route_and_duplicates() {
        let mut r = ProviderRegistry::new();
        r.register("ollama/", Arc::new(Fixed("local", "L"))).unwrap();
        assert_eq!(
            r.complete(&CompletionRequest::new("qwen-plus", "hi")).unwrap_err(),
            ProviderError::NoProvider("qwen-plus".into())
        );
        assert_eq!(
            r.register("ollama/", Arc::new(Fixed("x", "x"))).unwrap_err(),
            ProviderError::DuplicatePrefix("ollama/".into())
        );
    }

    #[test]
    fn rejects_empty_fields() {
        let r = registry();
        assert!(matches!(
            r.complete(&CompletionRequest::new("", "hi")),
            Err(ProviderError::InvalidRequest(_))
        ));
        assert!(matches!(
            r.complete(&CompletionRequest::new("m", "  ")),
            Err(ProviderError::InvalidRequest(_))
        ));
    }

    #[test]
    fn one_repair_retry() {
        let schema = OutputSchema::of(OutputKind::ArrayTyped, &[("summary", ValueType::Text)]);
        let provider = Arc::new(Repairable(AtomicUsize::new(0)));
        let mut r = ProviderRegistry::new();
        r.register("", provider.clone()).unwrap();
        let res = r
            .complete(&CompletionRequest::new("m", "q").with_schema(schema.clone()))
            .unwrap();
        assert_eq!(provider.0.load(Ordering::SeqCst), 2);
        let items = res.parsed.unwrap();
        assert_eq!(items.items()[0]["summary"], PropertyValue::from("fixed"));

        let mut bad = ProviderRegistry::new();
        bad.register("", Arc::new(Fixed("bad", "not json"))).unwrap();
        assert!(matches!(
            bad.complete(&CompletionRequest::new("m", "q").with_schema(schema)),
            Err(ProviderError::ParseFailure(_))
        ));
    }

    #[test]
    fn json_extraction() {
        assert_eq!(extract_json(" [1, 2] "), Some(serde_json::json!([1, 2])));
        assert_eq!(
            extract_json("Sure:\n```json\n{\"a\": 1}\n```\nDone."),
            Some(serde_json::json!({"a": 1}))
        );
        assert_eq!(
            extract_json("Here you go: [{\"a\": \"x\"}] hope it helps"),
            Some(serde_json::json!([{"a": "x"}]))
        );
        assert_eq!(extract_json("no json here"), None);
        assert_eq!(extract_json("] backwards ["), None);
    }

    #[test]
    fn render_orders_upstream_before_context() {
        let mut req = CompletionRequest::new("m", "Please summarize the solutions")
            .with_context(vec!["chunk one".into()])
            .with_schema(OutputSchema::of(OutputKind::ArrayTyped, &[("summary", ValueType::Text)]));
        req.upstream.push(UpstreamOutput {
            name: "Challenges".into(),
            text: "[\"c1\"]".into(),
        });
        let text = req.render();
        let up = text.find("Output of Challenges:").unwrap();
        let ctx = text.find("[1] chunk one").unwrap();
        let task = text.find("Task: Please summarize the solutions").unwrap();
        assert!(up < ctx && ctx < task);
        assert!(text.contains("JSON array of objects"));
    }
}
