use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{CompletionProvider, CompletionRequest, ProviderError, Result};

/// One canned answer, keyed by document and task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedResponse {
    pub doc_id: String,
    pub task: String,
    /// JSON answer; strings are returned verbatim, anything else serialized.
    #[serde(default)]
    pub output: Option<Value>,
    /// Simulated transport failure.
    #[serde(default)]
    pub error: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScriptFile {
    responses: Vec<ScriptedResponse>,
}

/// Lookup-table provider: identical requests always get byte-identical
/// answers. Unknown (doc, task) pairs fail.
#[derive(Debug, Clone, Default)]
pub struct ScriptedProvider {
    table: BTreeMap<(String, String), std::result::Result<String, String>>,
}

impl ScriptedProvider {
    pub fn new(responses: Vec<ScriptedResponse>) -> Result<Self> {
        let mut table = BTreeMap::new();
        for r in responses {
            let answer = match (r.output, r.error) {
                (Some(Value::String(s)), None) => Ok(s),
                (Some(v), None) => Ok(v.to_string()),
                (None, Some(e)) => Err(e),
                _ => {
                    return Err(ProviderError::Config(format!(
                        "scripted response for ({:?}, {:?}) needs exactly one of output/error",
                        r.doc_id, r.task
                    )))
                }
            };
            if table.insert((r.doc_id.clone(), r.task.clone()), answer).is_some() {
                return Err(ProviderError::Config(format!(
                    "duplicate scripted response for ({:?}, {:?})",
                    r.doc_id, r.task
                )));
            }
        }
        Ok(ScriptedProvider { table })
    }

    /// Loads `{"responses": [{"doc_id", "task", "output" | "error"}]}`.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ProviderError::Config(format!("cannot read {}: {e}", path.display())))?;
        let file: ScriptFile = serde_json::from_str(&text)
            .map_err(|e| ProviderError::Config(format!("{}: {e}", path.display())))?;
        Self::new(file.responses)
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

impl CompletionProvider for ScriptedProvider {
    fn id(&self) -> &str {
        "scripted"
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String> {
        match self.table.get(&(request.doc_id.clone(), request.task.clone())) {
            Some(Ok(answer)) => Ok(answer.clone()),
            Some(Err(e)) => Err(ProviderError::ProviderFailure(e.clone())),
            None => Err(ProviderError::ProviderFailure(format!(
                "no scripted response for doc {:?}, task {:?}",
                request.doc_id, request.task
            ))),
        }
    }
}
