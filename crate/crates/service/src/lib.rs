//! Local HTTP service for the review loop: recommendations out, verdicts
//! in, weights visible and adjustable, training on schedule or demand.

pub mod api;
pub mod config;
pub mod state;

use std::net::SocketAddr;
use std::sync::Arc;

use kglf_core::learning::LearningError;
use kglf_core::storage::StorageError;
use thiserror::Error;

pub use api::router;
pub use config::{Overrides, ServiceConfig};
pub use state::AppState;

#[derive(Error, Debug)]
pub enum ServiceError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error(transparent)]
    Learning(#[from] LearningError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A running server: its address and the task serving it.
pub struct Running {
    pub addr: SocketAddr,
    pub task: tokio::task::JoinHandle<std::io::Result<()>>,
}

/// Binds `host:port` from the state's config and serves in the background.
pub async fn start(state: Arc<AppState>) -> Result<Running, ServiceError> {
    let listener = tokio::net::TcpListener::bind((state.config.host.as_str(), state.config.port)).await?;
    let addr = listener.local_addr()?;
    let app = router(state);
    let task = tokio::spawn(async move { axum::serve(listener, app).await });
    Ok(Running { addr, task })
}

/// Serves until Ctrl-C. `on_ready` receives the bound address.
pub async fn serve(state: Arc<AppState>, on_ready: impl FnOnce(SocketAddr)) -> Result<(), ServiceError> {
    let listener = tokio::net::TcpListener::bind((state.config.host.as_str(), state.config.port)).await?;
    let addr = listener.local_addr()?;
    on_ready(addr);
    tracing::info!(%addr, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
