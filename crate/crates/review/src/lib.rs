//! Human review of synthesized candidates over HTTP: browse pending clips
//! with mask overlays, record accept/reject decisions in a durable log, and
//! export the accepted subset as a dataset manifest.

pub mod api;
pub mod error;
pub mod store;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use log::{info, warn};

pub use api::router;
pub use error::{ReviewError, Result};
pub use store::{Decision, DecisionRequest, DecisionVerdict, LogEntry, ReasonCode, ReviewState, ReviewStore, Status};

#[derive(Clone, Debug)]
pub struct ServeConfig {
    pub manifest: PathBuf,
    pub log: PathBuf,
    pub addr: SocketAddr,
    /// Directory with the browser UI bundle, served at `/`.
    pub ui_dir: Option<PathBuf>,
    pub snapshot_every: u64,
}

/// Runs until Ctrl-C, then writes a final snapshot.
pub async fn serve(cfg: ServeConfig) -> Result<()> {
    let mut store = ReviewStore::open(&cfg.manifest, &cfg.log)?;
    store.snapshot_every = cfg.snapshot_every;
    let store = Arc::new(store);
    let listener = tokio::net::TcpListener::bind(cfg.addr)
        .await
        .map_err(|e| ReviewError::BadRequest(format!("bind {}: {e}", cfg.addr)))?;
    info!("review service on http://{}", listener.local_addr().map_or(cfg.addr, |a| a));
    axum::serve(listener, router(store.clone(), cfg.ui_dir))
        .with_graceful_shutdown(async {
            if let Err(e) = tokio::signal::ctrl_c().await {
                warn!("signal handler: {e}");
            }
        })
        .await
        .map_err(|e| ReviewError::io(&cfg.log, e))?;
    let path = store.snapshot()?;
    info!("snapshot written to {}", path.display());
    Ok(())
}
