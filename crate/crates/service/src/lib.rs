//! HTTP session service, configuration and journal persistence for the
//! belief-driven course advisor.

pub mod config;
pub mod http;
pub mod journal;
pub mod service;

use std::net::SocketAddr;
use std::sync::Arc;

pub use config::{AppConfig, ConfigError};
pub use service::{AdvisorService, ServiceError};

/// Bind `addr` and serve until `shutdown` resolves. `ready` receives the
/// bound address, which matters when the port is 0.
pub async fn serve(
    service: Arc<AdvisorService>,
    addr: SocketAddr,
    ready: impl FnOnce(SocketAddr),
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    ready(listener.local_addr()?);
    axum::serve(listener, http::router(service)).with_graceful_shutdown(shutdown).await
}
