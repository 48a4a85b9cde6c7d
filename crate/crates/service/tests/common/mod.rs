#![allow(dead_code)]

use std::sync::Arc;
use std::time::Duration;

use axum::Router;
use serde_json::Value as Json;
use skyfed_core::catalog::Catalog;
use skyfed_core::node::NodeEngine;
use tokio::net::TcpListener;

pub const TIMEOUT: Duration = Duration::from_secs(30);

/// Serves `app` on an ephemeral local port and returns its base URL.
pub async fn spawn(app: Router) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move {
        axum::serve(listener, app).await.unwrap();
    });
    format!("http://{addr}")
}

pub async fn spawn_node(engine: Arc<NodeEngine>) -> String {
    spawn(skyfed_service::node_router(engine, TIMEOUT)).await
}

pub fn engine_with_cap(catalog: &Catalog, cap: usize) -> Arc<NodeEngine> {
    let index = super::support::indexed(catalog);
    Arc::new(NodeEngine::new(catalog.clone(), index, cap))
}

/// Status and decoded body of a raw request.
pub async fn call(method: &str, url: &str, body: Option<&str>) -> (u16, Json) {
    let http = reqwest::Client::new();
    let req = match method {
        "GET" => http.get(url),
        "POST" => http.post(url),
        other => panic!("unsupported method {other}"),
    };
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(b.to_owned()),
        None => req,
    };
    let resp = req.send().await.unwrap();
    let status = resp.status().as_u16();
    let text = resp.text().await.unwrap();
    let json = serde_json::from_str(&text).unwrap_or(Json::String(text));
    (status, json)
}

/// Asserts the error envelope shape and returns `(code, message)`.
pub fn envelope(status: u16, body: &Json, want_status: u16, want_code: &str) -> String {
    assert_eq!(status, want_status, "body: {body}");
    let err = body.get("error").unwrap_or_else(|| panic!("no envelope in {body}"));
    assert_eq!(err["code"], want_code, "body: {body}");
    let keys: Vec<&String> = err.as_object().unwrap().keys().collect();
    assert!(keys.iter().all(|k| ["code", "message", "offset"].contains(&k.as_str())), "{body}");
    err["message"].as_str().unwrap().to_owned()
}

/// The body with `stats.elapsed_ms` zeroed, for byte-level comparisons.
pub fn without_timing(mut body: Json) -> Json {
    if let Some(stats) = body.get_mut("stats") {
        stats["elapsed_ms"] = Json::from(0);
    }
    if let Some(objects) = body.get_mut("objects") {
        *objects = without_timing(objects.take());
    }
    body
}
