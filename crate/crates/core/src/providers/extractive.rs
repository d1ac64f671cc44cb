use std::collections::BTreeSet;

use serde_json::{json, Map, Value};

use super::{CompletionProvider, CompletionRequest, ProviderError, Result};
use crate::graph::ValueType;
use crate::inspection::OutputKind;
use crate::text::{content_stems, sentences};

/// Items returned for array outputs.
pub const MAX_ITEMS: usize = 5;

/// Offline summarizer: answers with the context sentences that share at
/// least one content stem with the query, best overlap first.
///
/// Only the retrieved chunks are read; upstream outputs are ignored.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExtractiveProvider;

impl ExtractiveProvider {
    /// Ranked matching sentences, deduplicated, ties in context order.
    pub fn rank(query: &str, chunks: &[String]) -> Vec<String> {
        let query_stems = content_stems(query);
        let mut seen = BTreeSet::new();
        let mut scored: Vec<(usize, usize, String)> = Vec::new();
        for sentence in chunks.iter().flat_map(|c| sentences(c)) {
            if !seen.insert(sentence.clone()) {
                continue;
            }
            let overlap = content_stems(&sentence).intersection(&query_stems).count();
            if overlap > 0 {
                scored.push((overlap, scored.len(), sentence));
            }
        }
        scored.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        scored.into_iter().map(|(_, _, s)| s).collect()
    }
}

impl CompletionProvider for ExtractiveProvider {
    fn id(&self) -> &str {
        "extractive"
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String> {
        let ranked = Self::rank(&request.prompt, &request.context_chunks);
        let Some(schema) = &request.output_schema else {
            if ranked.is_empty() {
                return Err(ProviderError::ProviderFailure(
                    "no context sentence overlaps the query".into(),
                ));
            }
            let mut text = ranked.into_iter().take(MAX_ITEMS).collect::<Vec<_>>().join(" ");
            if let Some((cut, _)) = text.char_indices().nth(request.max_output) {
                text.truncate(cut);
            }
            return Ok(text);
        };
        let field = schema.primary_field();
        if schema.fields[field] != ValueType::Text {
            return Err(ProviderError::ProviderFailure(format!(
                "extractive answers fill text fields only; {field:?} is {}",
                schema.fields[field]
            )));
        }
        let item = |s: String| {
            let mut m = Map::new();
            m.insert(field.to_string(), Value::String(s));
            Value::Object(m)
        };
        let answer = match schema.kind {
            OutputKind::ArrayTyped => {
                Value::Array(ranked.into_iter().take(MAX_ITEMS).map(item).collect())
            }
            OutputKind::SingleTyped => match ranked.into_iter().next() {
                Some(s) => item(s),
                None => {
                    return Err(ProviderError::ProviderFailure(
                        "no context sentence overlaps the query".into(),
                    ))
                }
            },
        };
        Ok(json!(answer).to_string())
    }
}
