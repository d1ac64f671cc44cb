use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{
    CompletionProvider, Embedder, ExtractiveProvider, HashEmbedder, ProviderError, ProviderRegistry,
    Result, ScriptedProvider,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RouteKind {
    Scripted,
    Extractive,
    Http,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouteConfig {
    pub prefix: String,
    #[serde(rename = "type")]
    pub kind: RouteKind,
    /// Scripted: path of the responses file, relative to the config file.
    #[serde(default)]
    pub fixtures: Option<PathBuf>,
    /// Http: chat-completions URL.
    #[serde(default)]
    pub endpoint: Option<String>,
    /// Http: model name sent on the wire.
    #[serde(default)]
    pub model: Option<String>,
    /// Http: environment variable holding the bearer token.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default)]
    pub timeout_secs: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum EmbedderConfig {
    Hash {
        #[serde(default = "default_dim")]
        dim: usize,
    },
}

fn default_dim() -> usize {
    64
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        EmbedderConfig::Hash { dim: default_dim() }
    }
}

impl EmbedderConfig {
    pub fn build(&self) -> Result<Arc<dyn Embedder>> {
        match self {
            EmbedderConfig::Hash { dim: 0 } => {
                Err(ProviderError::Config("embedder dim must be positive".into()))
            }
            EmbedderConfig::Hash { dim } => Ok(Arc::new(HashEmbedder::new(*dim))),
        }
    }
}

/// `{"routes": [{"prefix": "ollama/", "type": "http", "endpoint": ...},
/// {"prefix": "", "type": "scripted", "fixtures": "path"}]}`
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderConfig {
    pub routes: Vec<RouteConfig>,
    #[serde(default)]
    pub embedder: EmbedderConfig,
}

/// True when `GRAPHY_OFFLINE` is set to a non-empty value other than "0".
pub fn offline_from_env() -> bool {
    std::env::var("GRAPHY_OFFLINE").is_ok_and(|v| !v.is_empty() && v != "0")
}

impl ProviderConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| ProviderError::Config(e.to_string()))
    }

    /// Builds the registry. Relative fixture paths resolve against
    /// `base_dir`; with `offline` set, any http route is an error.
    pub fn build(&self, base_dir: &Path, offline: bool) -> Result<ProviderRegistry> {
        let mut registry = ProviderRegistry::new();
        for route in &self.routes {
            let provider: Arc<dyn CompletionProvider> = match route.kind {
                RouteKind::Extractive => Arc::new(ExtractiveProvider),
                RouteKind::Scripted => {
                    let path = route.fixtures.as_ref().ok_or_else(|| {
                        ProviderError::Config(format!("scripted route {:?} needs \"fixtures\"", route.prefix))
                    })?;
                    Arc::new(ScriptedProvider::from_file(&base_dir.join(path))?)
                }
                RouteKind::Http => {
                    if offline {
                        return Err(ProviderError::Config(format!(
                            "route {:?} uses the http provider but GRAPHY_OFFLINE is set",
                            route.prefix
                        )));
                    }
                    build_http(route)?
                }
            };
            registry.register(&route.prefix, provider)?;
        }
        Ok(registry)
    }
}

#[cfg(feature = "http")]
fn build_http(route: &RouteConfig) -> Result<Arc<dyn CompletionProvider>> {
    let endpoint = route.endpoint.as_deref().ok_or_else(|| {
        ProviderError::Config(format!("http route {:?} needs \"endpoint\"", route.prefix))
    })?;
    let api_key = match &route.api_key_env {
        Some(var) => Some(std::env::var(var).map_err(|_| {
            ProviderError::Config(format!("environment variable {var} is not set"))
        })?),
        None => None,
    };
    let timeout = std::time::Duration::from_secs(route.timeout_secs.unwrap_or(120));
    Ok(Arc::new(super::HttpProvider::new(
        endpoint,
        &route.prefix,
        route.model.clone(),
        api_key,
        timeout,
    )))
}

#[cfg(not(feature = "http"))]
fn build_http(route: &RouteConfig) -> Result<Arc<dyn CompletionProvider>> {
    Err(ProviderError::Config(format!(
        "route {:?} uses the http provider, which this build does not include",
        route.prefix
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builds_routes() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("script.json"), r#"{"responses": []}"#).unwrap();
        let cfg = ProviderConfig::from_json(
            r#"{"routes": [
                {"prefix": "ollama/", "type": "extractive"},
                {"prefix": "", "type": "scripted", "fixtures": "script.json"}
            ]}"#,
        )
        .unwrap();
        let reg = cfg.build(dir.path(), true).unwrap();
        assert_eq!(reg.route("ollama/x").unwrap().id(), "extractive");
        assert_eq!(reg.route("qwen-plus").unwrap().id(), "scripted");
        assert_eq!(cfg.embedder, EmbedderConfig::Hash { dim: 64 });
    }

    #[test]
    fn offline_forbids_http() {
        let cfg = ProviderConfig::from_json(
            r#"{"routes": [{"prefix": "", "type": "http", "endpoint": "http://localhost:1/v1"}]}"#,
        )
        .unwrap();
        let err = cfg.build(Path::new("."), true).unwrap_err();
        assert!(err.to_string().contains("GRAPHY_OFFLINE"), "{err}");
    }

    #[test]
    fn config_errors() {
        assert!(ProviderConfig::from_json(r#"{"routes": [{"prefix": "", "type": "magic"}]}"#).is_err());
        let no_fixtures = ProviderConfig::from_json(r#"{"routes": [{"prefix": "", "type": "scripted"}]}"#).unwrap();
        assert!(no_fixtures.build(Path::new("."), true).is_err());
        let dup = ProviderConfig::from_json(
            r#"{"routes": [{"prefix": "", "type": "extractive"}, {"prefix": "", "type": "extractive"}]}"#,
        )
        .unwrap();
        assert_eq!(dup.build(Path::new("."), true).unwrap_err(), ProviderError::DuplicatePrefix("".into()));
        assert!(EmbedderConfig::Hash { dim: 0 }.build().is_err());
    }
}
