//! Binding, background eviction and graceful shutdown.

use std::future::Future;
use std::sync::Arc;
use std::time::Duration;

use tokio::net::TcpListener;

use crate::api::{router, AppState, SharedState};
use crate::app::{App, AppError};
use crate::sessions::SessionStore;

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    App(#[from] AppError),
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error("io failure: {0}")]
    Io(#[from] std::io::Error),
}

/// Loads the graph snapshot and session store for `app`.
pub fn state(app: App) -> Result<SharedState, ServeError> {
    let store = app.open_store()?;
    let graph = store.snapshot();
    drop(store);
    let sessions = SessionStore::open(
        app.config.sessions_dir(),
        app.config.jobs_dir(),
        app.config.session_idle,
    )?;
    Ok(Arc::new(AppState { app, graph, sessions }))
}

pub async fn bind(addr: &str) -> Result<TcpListener, ServeError> {
    TcpListener::bind(addr).await.map_err(|source| ServeError::Bind {
        addr: addr.to_string(),
        source,
    })
}

/// Serves until `shutdown` resolves, then writes every live session.
pub async fn serve(
    listener: TcpListener,
    state: SharedState,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), ServeError> {
    let sweep = {
        let state = state.clone();
        let every = state.app.config.session_idle.clamp(Duration::from_secs(1), Duration::from_secs(600));
        tokio::spawn(async move {
            let mut tick = tokio::time::interval(every);
            loop {
                tick.tick().await;
                let evicted = state.sessions.evict_idle();
                if evicted > 0 {
                    tracing::info!(evicted, "idle sessions unloaded");
                }
            }
        })
    };
    tracing::info!(addr = %listener.local_addr()?, nodes = state.graph.node_count(), "serving");
    let result = axum::serve(listener, router(state.clone()))
        .with_graceful_shutdown(shutdown)
        .await;
    sweep.abort();
    match state.sessions.persist_all() {
        Ok(n) => tracing::info!(sessions = n, "sessions persisted"),
        Err(e) => tracing::error!("persisting sessions on shutdown: {e}"),
    }
    result.map_err(ServeError::Io)
}
