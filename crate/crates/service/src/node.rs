//! Node endpoints over one [`NodeEngine`]. Every handler is a thin
//! adapter: decode, call the engine, encode.

use std::future::Future;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Query, State};
use axum::http::Uri;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use skyfed_core::ingest::parse_schema;
use skyfed_core::node::{NodeEngine, NodeError, NodeMetadata, XMatchRequest, XMatchResponse};
use skyfed_core::store::open_store;
use skyfed_core::table::ResultTable;
use tokio::net::TcpListener;

use crate::config::{ConfigError, NodeConfig};
use crate::error::ApiError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryBody {
    pub q: String,
}

#[derive(Debug, Clone, Copy, Deserialize)]
pub struct ConeParams {
    pub ra: f64,
    pub dec: f64,
    pub r_deg: f64,
}

#[derive(Clone)]
struct NodeState {
    engine: Arc<NodeEngine>,
    timeout: Duration,
}

pub fn node_router(engine: Arc<NodeEngine>, timeout: Duration) -> Router {
    Router::new()
        .route("/v1/metadata", get(metadata))
        .route("/v1/query", post(query))
        .route("/v1/cone", get(cone))
        .route("/v1/xmatch", post(xmatch))
        .fallback(not_found)
        .with_state(NodeState { engine, timeout })
}

/// Runs engine work off the async threads, bounded by `timeout`.
pub(crate) async fn run_blocking<T, F>(timeout: Duration, work: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T, NodeError> + Send + 'static,
{
    match tokio::time::timeout(timeout, tokio::task::spawn_blocking(work)).await {
        Err(_) => Err(ApiError::timeout(timeout.as_millis() as u64)),
        Ok(Err(join)) => Err(ApiError::internal(format!("worker failed: {join}"))),
        Ok(Ok(result)) => result.map_err(ApiError::from),
    }
}

/// Bounds an async computation by `timeout`.
pub(crate) async fn with_timeout<T>(timeout: Duration, work: impl Future<Output = Result<T, ApiError>>) -> Result<T, ApiError> {
    tokio::time::timeout(timeout, work)
        .await
        .unwrap_or_else(|_| Err(ApiError::timeout(timeout.as_millis() as u64)))
}

pub(crate) async fn not_found(uri: Uri) -> ApiError {
    ApiError::not_found(uri.path())
}

async fn metadata(State(s): State<NodeState>) -> Json<NodeMetadata> {
    Json(s.engine.metadata())
}

async fn query(State(s): State<NodeState>, body: Result<Json<QueryBody>, JsonRejection>) -> Result<Json<ResultTable>, ApiError> {
    let Json(QueryBody { q }) = body.map_err(|e| ApiError::invalid_json(e.body_text()))?;
    let engine = s.engine.clone();
    run_blocking(s.timeout, move || engine.query(&q)).await.map(Json)
}

async fn cone(State(s): State<NodeState>, params: Result<Query<ConeParams>, QueryRejection>) -> Result<Json<ResultTable>, ApiError> {
    let Query(p) = params.map_err(|e| ApiError::invalid_parameter(e.body_text()))?;
    let engine = s.engine.clone();
    run_blocking(s.timeout, move || engine.cone(p.ra, p.dec, p.r_deg)).await.map(Json)
}

async fn xmatch(State(s): State<NodeState>, body: Result<Json<XMatchRequest>, JsonRejection>) -> Result<Json<XMatchResponse>, ApiError> {
    let Json(req) = body.map_err(|e| ApiError::invalid_json(e.body_text()))?;
    let engine = s.engine.clone();
    run_blocking(s.timeout, move || engine.xmatch(&req)).await.map(Json)
}

/// Opens the configured store and builds the engine, checking the optional
/// schema descriptor against the stored catalog.
pub fn load_engine(config: &NodeConfig) -> Result<NodeEngine, ConfigError> {
    let (catalog, index) = open_store(&config.store, config.zone_height_deg)?;
    if let Some(path) = &config.schema {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::io(path, e))?;
        let schema = parse_schema(&text).map_err(|e| ConfigError::Invalid(format!("{}: {e}", path.display())))?;
        if schema.survey != catalog.schema.survey || schema.bands != catalog.schema.bands {
            return Err(ConfigError::Invalid(format!(
                "{} describes survey {} with bands {:?}, but the store holds {} with bands {:?}",
                path.display(),
                schema.survey,
                schema.bands,
                catalog.schema.survey,
                catalog.schema.bands
            )));
        }
    }
    Ok(NodeEngine::new(catalog, index, config.row_cap))
}

/// Loads the store and serves the node until `shutdown` resolves.
pub async fn run_node(config: &NodeConfig, shutdown: impl Future<Output = ()> + Send + 'static) -> Result<(), ConfigError> {
    let engine = Arc::new(load_engine(config)?);
    let listener = TcpListener::bind(config.bind).await.map_err(|e| ConfigError::Bind {
        addr: config.bind,
        source: e,
    })?;
    tracing::info!(
        survey = %engine.catalog().survey(),
        objects = engine.catalog().objects.len(),
        addr = %config.bind,
        "node listening"
    );
    let app = node_router(engine, Duration::from_millis(config.timeout_ms));
    crate::serve(listener, app, shutdown)
        .await
        .map_err(|e| ConfigError::Bind {
            addr: config.bind,
            source: e,
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[tokio::test]
    async fn worker_panic_is_an_internal_error() {
        let err = run_blocking::<(), _>(Duration::from_secs(5), || panic!("boom")).await.unwrap_err();
        assert_eq!(err.0.code, "internal_error");
        assert_eq!(err.status().as_u16(), 500);
    }

    #[tokio::test]
    async fn slow_work_times_out() {
        let err = run_blocking(Duration::from_millis(10), || {
            std::thread::sleep(Duration::from_millis(300));
            Ok(())
        })
        .await
        .unwrap_err();
        assert_eq!(err.0.code, "timeout");
        assert_eq!(err.status().as_u16(), 408);
    }
}
