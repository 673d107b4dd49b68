//! Persistence and HTTP access to runs, individuals and interpolations.
//!
//! Long-running work (evolution runs, interpolation sweeps) is queued as
//! jobs and executed in the background; clients poll `/api/jobs/{id}`.

pub mod api;
pub mod error;
pub mod jobs;
pub mod store;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

pub use api::{router, Studio};
pub use error::{ApiError, StoreError};
pub use jobs::{JobKind, JobRecord, JobStatus, Jobs};
pub use store::{IndividualDoc, RunSummary, Store};

#[derive(Clone, Debug)]
pub struct ServeConfig {
    pub listen: SocketAddr,
    pub store_root: PathBuf,
    /// Threads used for evaluations inside a job.
    pub workers: usize,
}

/// Serves the API until ctrl-c.
pub async fn serve(cfg: ServeConfig) -> Result<(), StoreError> {
    let studio = Arc::new(Studio::open(&cfg.store_root, cfg.workers)?);
    let app = router(studio);
    let listener = tokio::net::TcpListener::bind(cfg.listen).await?;
    tracing::info!(addr = %listener.local_addr()?, root = %cfg.store_root.display(), "listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
