//! Portal endpoints: federation metadata, federated queries, and the web
//! console's static assets.

use std::future::Future;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Query, State};
use axum::response::Html;
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use skyfed_core::federation::{run_federated, Federation, NodeClient};
use skyfed_core::node::NodeMetadata;
use skyfed_core::table::ResultTable;
use tokio::net::TcpListener;
use tower_http::services::ServeDir;

use crate::client::HttpNodeClient;
use crate::config::{ConfigError, PortalConfig};
use crate::error::ApiError;
use crate::node::{not_found, with_timeout, QueryBody};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveysBody {
    pub surveys: Vec<NodeMetadata>,
}

#[derive(Clone)]
struct PortalState {
    federation: Arc<Federation>,
    timeout: Duration,
}

const PLACEHOLDER_INDEX: &str = "<!doctype html>\n<title>skyfed portal</title>\n<p>No web console is installed. \
The JSON API is at <code>GET /v1/surveys</code> and <code>POST /v1/fedquery</code>.</p>\n";

/// Routes for the portal. With `static_dir`, unmatched paths are served
/// from that directory; otherwise `/` returns a short placeholder page.
pub fn portal_router(federation: Arc<Federation>, static_dir: Option<PathBuf>, timeout: Duration) -> Router {
    let api = Router::new()
        .route("/v1/surveys", get(surveys))
        .route("/v1/fedquery", get(fedquery_get).post(fedquery_post))
        .route("/v1/{*rest}", get(not_found).post(not_found));
    let app = match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(|| async { Html(PLACEHOLDER_INDEX) })).fallback(not_found),
    };
    app.with_state(PortalState { federation, timeout })
}

async fn surveys(State(s): State<PortalState>) -> Result<Json<SurveysBody>, ApiError> {
    with_timeout(s.timeout, async {
        let mut out = Vec::new();
        for survey in s.federation.surveys() {
            out.push(s.federation.metadata(survey).await?);
        }
        Ok(Json(SurveysBody { surveys: out }))
    })
    .await
}

/// Aborts the wrapped task when the request is dropped or times out.
struct AbortOnDrop(tokio::task::AbortHandle);

impl Drop for AbortOnDrop {
    fn drop(&mut self) {
        self.0.abort();
    }
}

/// Runs the query on its own task so a panicking node client surfaces as
/// `internal_error` rather than a dropped connection.
async fn fedquery(s: PortalState, q: String) -> Result<Json<ResultTable>, ApiError> {
    let federation = Arc::clone(&s.federation);
    let task = tokio::spawn(async move { run_federated(&q, &federation).await });
    let _guard = AbortOnDrop(task.abort_handle());
    with_timeout(s.timeout, async {
        match task.await {
            Ok(result) => Ok(Json(result?)),
            Err(join) => Err(ApiError::internal(format!("query task failed: {join}"))),
        }
    })
    .await
}

async fn fedquery_get(State(s): State<PortalState>, params: Result<Query<QueryBody>, QueryRejection>) -> Result<Json<ResultTable>, ApiError> {
    let Query(QueryBody { q }) = params.map_err(|e| ApiError::invalid_parameter(e.body_text()))?;
    fedquery(s, q).await
}

async fn fedquery_post(State(s): State<PortalState>, body: Result<Json<QueryBody>, JsonRejection>) -> Result<Json<ResultTable>, ApiError> {
    let Json(QueryBody { q }) = body.map_err(|e| ApiError::invalid_json(e.body_text()))?;
    fedquery(s, q).await
}

/// HTTP clients for every configured node, in configuration order.
pub fn federation_from_config(config: &PortalConfig) -> Result<Federation, ConfigError> {
    let timeout = Duration::from_millis(config.timeout_ms);
    let mut nodes = Vec::with_capacity(config.nodes.len());
    for entry in &config.nodes {
        let client = HttpNodeClient::new(&entry.url, timeout)
            .map_err(|e| ConfigError::Invalid(format!("node {}: {e}", entry.survey)))?;
        let client: Arc<dyn NodeClient> = Arc::new(client);
        nodes.push((entry.survey.clone(), client));
    }
    Ok(Federation::new(nodes, config.settings.clone()))
}

/// Serves the portal until `shutdown` resolves.
pub async fn run_portal(config: &PortalConfig, shutdown: impl Future<Output = ()> + Send + 'static) -> Result<(), ConfigError> {
    let federation = Arc::new(federation_from_config(config)?);
    let listener = TcpListener::bind(config.bind).await.map_err(|e| ConfigError::Bind {
        addr: config.bind,
        source: e,
    })?;
    tracing::info!(nodes = config.nodes.len(), addr = %config.bind, "portal listening");
    let app = portal_router(federation, config.static_dir.clone(), Duration::from_millis(config.timeout_ms));
    crate::serve(listener, app, shutdown)
        .await
        .map_err(|e| ConfigError::Bind {
            addr: config.bind,
            source: e,
        })
}
