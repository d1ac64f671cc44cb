//! Shared service context: providers, repository and generation model built
//! from an [`AppConfig`].

use std::sync::Arc;

use graphy_core::generation::{GenerationModel, LlmModel, OfflineModel};
use graphy_core::graph::{GraphError, GraphStore};
use graphy_core::ingest::ChunkCache;
use graphy_core::inspection::{InspectionError, Services};
use graphy_core::navigation::{FixtureRepository, NavigationError, Repository};
use graphy_core::par::Exec;
use graphy_core::providers::{offline_from_env, ProviderError};
use thiserror::Error;

use crate::config::{AppConfig, RepositoryConfig};

#[derive(Debug, Error)]
pub enum AppError {
    #[error("providers: {0}")]
    Providers(#[from] ProviderError),
    #[error("repository: {0}")]
    Repository(#[from] NavigationError),
    #[error("workflow: {0}")]
    Workflow(#[from] InspectionError),
    #[error("graph store: {0}")]
    Graph(#[from] GraphError),
    #[error("arXiv repository support was not compiled in (enable the `http` feature)")]
    NoHttp,
}

pub struct App {
    pub config: AppConfig,
    pub services: Services,
    pub repository: Arc<dyn Repository>,
    pub model: Arc<dyn GenerationModel>,
    pub exec: Exec,
    pub offline: bool,
}

impl App {
    pub fn new(config: AppConfig) -> Result<Self, AppError> {
        let offline = offline_from_env();
        let registry = config.providers.build(&config.providers_base, offline)?;
        let mut services = Services::new(registry);
        services.embedder = config.providers.embedder.build()?;
        services.cache = Some(ChunkCache::new(config.cache_dir().join("chunks")));

        let repository: Arc<dyn Repository> = match &config.repository {
            RepositoryConfig::Fixture { manifest } => Arc::new(FixtureRepository::from_manifest(manifest)?),
            RepositoryConfig::Arxiv { api, pdf_base } => arxiv(&config, api, pdf_base, offline)?,
        };

        let model: Arc<dyn GenerationModel> = match &config.generation_model {
            Some(id) => Arc::new(LlmModel::new(services.providers.clone(), id.clone())),
            None => Arc::new(OfflineModel),
        };

        Ok(App {
            config,
            services,
            repository,
            model,
            exec: Exec::default(),
            offline,
        })
    }

    /// Opens the persistent graph, extending its schema with the workflow's.
    pub fn open_store(&self) -> Result<GraphStore, AppError> {
        let schema = self.config.workflow.graph_schema()?;
        Ok(GraphStore::open(self.config.graph_dir(), &schema)?)
    }
}

#[cfg(feature = "http")]
fn arxiv(
    config: &AppConfig,
    api: &Option<String>,
    pdf_base: &Option<String>,
    offline: bool,
) -> Result<Arc<dyn Repository>, AppError> {
    use graphy_core::navigation::ArxivRepository;
    let mut repo = ArxivRepository::new(offline).with_cache_dir(config.cache_dir().join("pdf"));
    if let (Some(api), Some(pdf)) = (api, pdf_base) {
        repo = repo.with_endpoint(api, pdf);
    }
    Ok(Arc::new(repo))
}

#[cfg(not(feature = "http"))]
fn arxiv(_: &AppConfig, _: &Option<String>, _: &Option<String>, _: bool) -> Result<Arc<dyn Repository>, AppError> {
    Err(AppError::NoHttp)
}
