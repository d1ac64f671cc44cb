use std::time::Duration;

use serde_json::{json, Value};

use super::{CompletionProvider, CompletionRequest, ProviderError, Result};

/// Client for an OpenAI-compatible `/chat/completions` endpoint.
pub struct HttpProvider {
    id: String,
    endpoint: String,
    prefix: String,
    model: Option<String>,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl std::fmt::Debug for HttpProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpProvider")
            .field("id", &self.id)
            .field("endpoint", &self.endpoint)
            .finish_non_exhaustive()
    }
}

impl HttpProvider {
    /// `model` overrides the wire model name; otherwise the request's model
    /// id with `prefix` stripped is sent.
    pub fn new(
        endpoint: &str,
        prefix: &str,
        model: Option<String>,
        api_key: Option<String>,
        timeout: Duration,
    ) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        HttpProvider {
            id: format!("http:{endpoint}"),
            endpoint: endpoint.to_string(),
            prefix: prefix.to_string(),
            model,
            api_key,
            agent,
        }
    }

    fn wire_model<'a>(&'a self, model_id: &'a str) -> &'a str {
        self.model
            .as_deref()
            .unwrap_or_else(|| model_id.strip_prefix(self.prefix.as_str()).unwrap_or(model_id))
    }
}

impl CompletionProvider for HttpProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String> {
        let body = json!({
            "model": self.wire_model(&request.model_id),
            "messages": [{"role": "user", "content": request.render()}],
            // rough chars-per-token ratio for English text
            "max_tokens": request.max_output.div_ceil(4).max(16),
            "temperature": 0,
        });
        let mut call = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let fail = |e: ureq::Error| ProviderError::ProviderFailure(format!("{}: {e}", self.endpoint));
        let mut response = call.send_json(&body).map_err(fail)?;
        let value: Value = response.body_mut().read_json().map_err(fail)?;
        value
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| {
                ProviderError::ProviderFailure(format!("{}: response has no message content", self.endpoint))
            })
    }
}
