//! Service configuration, read from a JSON file.
//!
//! Relative paths are resolved against the directory holding the config
//! file, so a config and its fixtures can be moved together.

use std::path::{Path, PathBuf};
use std::time::Duration;

use graphy_core::inspection::{parse_workflow, WorkflowSpec};
use graphy_core::navigation::ExpansionBudget;
use graphy_core::providers::ProviderConfig;
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {message}")]
    Invalid { path: PathBuf, message: String },
    #[error("workflow {path}: {message}")]
    Workflow { path: PathBuf, message: String },
    #[error("data_dir {path} is not writable: {source}")]
    DataDir { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RepositoryConfig {
    /// A local manifest of `{repo_doc_id, title, file}` entries.
    Fixture { manifest: PathBuf },
    /// The public arXiv API.
    Arxiv {
        #[serde(default)]
        api: Option<String>,
        #[serde(default)]
        pdf_base: Option<String>,
    },
}

/// Where provider routes come from: an inline object or a separate file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum ProvidersSource {
    File(PathBuf),
    Inline(ProviderConfig),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    data_dir: PathBuf,
    providers: ProvidersSource,
    workflow: PathBuf,
    repository: RepositoryConfig,
    #[serde(default = "default_bind")]
    bind: String,
    #[serde(default)]
    workers: Option<usize>,
    #[serde(default = "default_idle_secs")]
    session_idle_secs: u64,
    #[serde(default)]
    generation_model: Option<String>,
    #[serde(default)]
    budget: Option<BudgetConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct BudgetConfig {
    max_depth: u32,
    max_new_facts: usize,
    #[serde(default = "default_reference_cap")]
    per_fact_reference_cap: usize,
}

fn default_bind() -> String {
    "127.0.0.1:8080".into()
}

fn default_idle_secs() -> u64 {
    24 * 60 * 60
}

fn default_reference_cap() -> usize {
    ExpansionBudget::default().per_fact_reference_cap
}

#[derive(Debug, Clone)]
pub struct AppConfig {
    pub data_dir: PathBuf,
    /// Directory relative fixture paths in `providers` resolve against.
    pub providers_base: PathBuf,
    pub providers: ProviderConfig,
    pub workflow_path: PathBuf,
    pub workflow: WorkflowSpec,
    pub repository: RepositoryConfig,
    pub bind: String,
    pub workers: usize,
    pub session_idle: Duration,
    /// Model id routed through the provider registry; `None` uses the
    /// offline template model.
    pub generation_model: Option<String>,
    pub budget: ExpansionBudget,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl AppConfig {
    /// Loads and validates a config: the workflow must parse and the data
    /// directory must be writable.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Self::from_json(&text, &base).map_err(|e| match e {
            ConfigError::Invalid { message, .. } => ConfigError::Invalid {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    pub fn from_json(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let raw: RawConfig = serde_json::from_str(text).map_err(|e| ConfigError::Invalid {
            path: PathBuf::new(),
            message: e.to_string(),
        })?;

        let workflow_path = resolve(base, &raw.workflow);
        let workflow_text = std::fs::read_to_string(&workflow_path).map_err(|e| ConfigError::Workflow {
            path: workflow_path.clone(),
            message: e.to_string(),
        })?;
        let workflow = parse_workflow(&workflow_text).map_err(|e| ConfigError::Workflow {
            path: workflow_path.clone(),
            message: e.to_string(),
        })?;

        let (providers, providers_base) = match raw.providers {
            ProvidersSource::Inline(p) => (p, base.to_path_buf()),
            ProvidersSource::File(p) => {
                let p = resolve(base, &p);
                let text = std::fs::read_to_string(&p).map_err(|source| ConfigError::Read {
                    path: p.clone(),
                    source,
                })?;
                let config = ProviderConfig::from_json(&text).map_err(|e| ConfigError::Invalid {
                    path: p.clone(),
                    message: e.to_string(),
                })?;
                (config, p.parent().unwrap_or(base).to_path_buf())
            }
        };

        let repository = match raw.repository {
            RepositoryConfig::Fixture { manifest } => RepositoryConfig::Fixture {
                manifest: resolve(base, &manifest),
            },
            other => other,
        };

        let data_dir = resolve(base, &raw.data_dir);
        check_writable(&data_dir)?;

        let budget = raw.budget.map_or_else(ExpansionBudget::default, |b| ExpansionBudget {
            max_depth: b.max_depth,
            max_new_facts: b.max_new_facts,
            per_fact_reference_cap: b.per_fact_reference_cap,
        });
        let workers = raw
            .workers
            .filter(|w| *w > 0)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(4, usize::from));

        Ok(AppConfig {
            data_dir,
            providers_base,
            providers,
            workflow_path,
            workflow,
            repository,
            bind: raw.bind,
            workers,
            session_idle: Duration::from_secs(raw.session_idle_secs),
            generation_model: raw.generation_model,
            budget,
        })
    }

    pub fn graph_dir(&self) -> PathBuf {
        self.data_dir.join("graph")
    }

    pub fn sessions_dir(&self) -> PathBuf {
        self.data_dir.join("sessions")
    }

    pub fn jobs_dir(&self) -> PathBuf {
        self.data_dir.join("jobs")
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.data_dir.join("cache")
    }
}

fn check_writable(dir: &Path) -> Result<(), ConfigError> {
    let err = |source| ConfigError::DataDir {
        path: dir.to_path_buf(),
        source,
    };
    std::fs::create_dir_all(dir).map_err(err)?;
    let probe = dir.join(".write-probe");
    std::fs::write(&probe, b"").map_err(err)?;
    std::fs::remove_file(&probe).map_err(err)
}
