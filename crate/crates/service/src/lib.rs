//! HTTP faces of a catalog node and of the federation portal, plus the reqwest
//! client the portal uses to reach remote nodes.

pub mod client;
pub mod config;
pub mod error;
pub mod node;
pub mod portal;

use std::future::Future;
use std::io;

use axum::Router;
use tokio::net::TcpListener;

pub use client::{HttpNodeClient, PortalClient, PortalError};
pub use config::{ConfigError, NodeConfig, PortalConfig};
pub use error::{ApiError, ErrorBody, ErrorEnvelope};
pub use node::{node_router, run_node};
pub use portal::{portal_router, run_portal};

/// Serves `app` on `listener` until `shutdown` resolves.
pub async fn serve(listener: TcpListener, app: Router, shutdown: impl Future<Output = ()> + Send + 'static) -> io::Result<()> {
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await
}
