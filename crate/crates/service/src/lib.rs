//! HTTP API over restoration sessions.
//!
//! Images travel as raw PNG bodies; parameters and state as JSON. Sessions
//! are persisted after every change and reloaded on demand, so a restarted
//! server picks up where the previous one stopped.

mod error;
mod routes;
mod state;

use std::net::SocketAddr;

pub use error::{ApiError, ErrorBody};
pub use routes::{router, Links, RollbackRequest, SessionView, StageView};
pub use state::{AppState, ServiceConfig};

/// Binds `addr` and serves until Ctrl-C. Expired sessions are collected in the background.
pub async fn serve(config: ServiceConfig, addr: SocketAddr) -> std::io::Result<()> {
    let state = AppState::new(&config).map_err(std::io::Error::other)?;
    let gc_state = state.clone();
    let period = (config.session_max_age / 4).clamp(std::time::Duration::from_secs(60), std::time::Duration::from_secs(3600));
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(period);
        loop {
            tick.tick().await;
            gc_state.collect_garbage().await;
        }
    });
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
