#[path = "../../core/tests/support/mod.rs"]
mod support;
mod common;

use std::sync::Arc;
use std::time::Duration;

use serde_json::{json, Value as Json};
use skyfed_core::catalog::Catalog;
use skyfed_core::federation::{run_federated, FederationSettings, NodeEntry};
use skyfed_core::table::ResultTable;
use skyfed_service::portal::{federation_from_config, portal_router};
use skyfed_service::{PortalClient, PortalConfig};
use tokio::net::TcpListener;
use tokio::sync::oneshot;

use common::{call, envelope, without_timing};

fn catalogs() -> Vec<Catalog> {
    support::federation_catalogs(support::FEDERATED_OBJECTS, support::FEDERATED_SEED, 200)
}

/// A node that stops serving when the returned sender fires.
async fn stoppable_node(cat: &Catalog) -> (String, oneshot::Sender<()>) {
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let (tx, rx) = oneshot::channel::<()>();
    let app = skyfed_service::node_router(support::engine(cat), common::TIMEOUT);
    tokio::spawn(skyfed_service::serve(listener, app, async move {
        let _ = rx.await;
    }));
    (format!("http://{addr}"), tx)
}

fn config(nodes: &[(String, String)], settings: FederationSettings) -> PortalConfig {
    PortalConfig {
        bind: "127.0.0.1:0".parse().unwrap(),
        nodes: nodes
            .iter()
            .map(|(survey, url)| NodeEntry {
                survey: survey.clone(),
                url: url.clone(),
            })
            .collect(),
        static_dir: None,
        timeout_ms: 30_000,
        settings,
    }
}

struct Deployment {
    portal: String,
    stops: Vec<oneshot::Sender<()>>,
}

async fn deploy(cats: &[Catalog], settings: FederationSettings, timeout: Duration) -> Deployment {
    let mut nodes = Vec::new();
    let mut stops = Vec::new();
    for cat in cats {
        let (url, stop) = stoppable_node(cat).await;
        nodes.push((cat.schema.survey.clone(), url));
        stops.push(stop);
    }
    let fed = federation_from_config(&config(&nodes, settings)).unwrap();
    let portal = common::spawn(portal_router(Arc::new(fed), None, timeout)).await;
    Deployment { portal, stops }
}

fn post_q(q: &str) -> String {
    json!({ "q": q }).to_string()
}

#[tokio::test]
async fn federated_corpus_equals_library_results() {
    let cats = catalogs();
    let local = support::local_federation(&cats, FederationSettings::default());
    let d = deploy(&cats, FederationSettings::default(), common::TIMEOUT).await;
    let url = format!("{}/v1/fedquery", d.portal);
    for (name, q) in support::federated_corpus() {
        let want = serde_json::to_value(run_federated(&q, &local).await.unwrap()).unwrap();
        let (status, body) = call("POST", &url, Some(&post_q(&q))).await;
        assert_eq!(status, 200, "{name}: {body}");
        assert_eq!(without_timing(body.clone()), without_timing(want.clone()), "{name}");
        let get_url = reqwest::Url::parse_with_params(&url, &[("q", q.as_str())]).unwrap();
        let (status, via_get) = call("GET", get_url.as_str(), None).await;
        assert_eq!(status, 200, "{name}");
        assert_eq!(without_timing(via_get), without_timing(want), "{name}");
        let table: ResultTable = serde_json::from_value(body).unwrap();
        assert!(table.columns.iter().all(|c| c.name.contains('.') || !c.name.contains(' ')));
    }
    let client = PortalClient::new(&d.portal, common::TIMEOUT).unwrap();
    let q = "SELECT sdss.object_id, first.object_id FROM XMATCH(sdss, first) WITH k = 3";
    let remote = client.fedquery(q).await.unwrap();
    assert!(remote.same_content(&run_federated(q, &local).await.unwrap()));
    assert_eq!(remote.rows.len(), 200);
}

#[tokio::test]
async fn surveys_lists_node_metadata_in_order() {
    let cats = catalogs();
    let d = deploy(&cats, FederationSettings::default(), common::TIMEOUT).await;
    let (status, body) = call("GET", &format!("{}/v1/surveys", d.portal), None).await;
    assert_eq!(status, 200);
    let want: Vec<Json> = cats
        .iter()
        .map(|c| serde_json::to_value(support::engine(c).metadata()).unwrap())
        .collect();
    assert_eq!(body, json!({ "surveys": want }));
    let client = PortalClient::new(&d.portal, common::TIMEOUT).unwrap();
    let names: Vec<String> = client.surveys().await.unwrap().into_iter().map(|m| m.survey).collect();
    assert_eq!(names, ["sdss", "first", "twomass"]);
}

#[tokio::test]
async fn planning_and_request_errors() {
    let cats = catalogs();
    let d = deploy(&cats, FederationSettings::default(), common::TIMEOUT).await;
    let url = format!("{}/v1/fedquery", d.portal);
    let (s, b) = call("POST", &url, Some(&post_q("SELECT * FROM XMATCH(sdss, galex)"))).await;
    let msg = envelope(s, &b, 400, "plan_error");
    assert!(msg.contains("unknown survey"), "{msg}");
    let (s, b) = call("POST", &url, Some(&post_q("SELECT ra FROM XMATCH(sdss, first)"))).await;
    let msg = envelope(s, &b, 400, "plan_error");
    assert!(msg.contains("sdss.ra") && msg.contains("first.ra"), "{msg}");
    let (s, b) = call("POST", &url, Some(&post_q("SELECT * FROM XMATCH(sdss, first) WHERE"))).await;
    envelope(s, &b, 400, "parse_error");
    assert_eq!(b["error"]["offset"], 39);
    let (s, b) = call("POST", &url, Some("{")).await;
    envelope(s, &b, 400, "invalid_json");
    let (s, b) = call("GET", &url, None).await;
    envelope(s, &b, 400, "invalid_parameter");
    let (s, b) = call("GET", &format!("{}/v1/nope", d.portal), None).await;
    envelope(s, &b, 404, "not_found");
}

#[tokio::test]
async fn row_caps_and_timeouts() {
    let cats = catalogs();
    let capped = FederationSettings {
        row_cap: Some(10),
        ..FederationSettings::default()
    };
    let d = deploy(&cats, capped, common::TIMEOUT).await;
    let q = post_q("SELECT sdss.object_id, first.object_id FROM XMATCH(sdss, first)");
    let (s, b) = call("POST", &format!("{}/v1/fedquery", d.portal), Some(&q)).await;
    envelope(s, &b, 413, "row_cap_exceeded");

    // A node-side cap surfaces with the same code.
    let mut nodes = Vec::new();
    for cat in &cats {
        let app = skyfed_service::node_router(common::engine_with_cap(cat, 100), common::TIMEOUT);
        nodes.push((cat.schema.survey.clone(), common::spawn(app).await));
    }
    let fed = federation_from_config(&config(&nodes, FederationSettings::default())).unwrap();
    let portal = common::spawn(portal_router(Arc::new(fed), None, common::TIMEOUT)).await;
    let (s, b) = call("POST", &format!("{portal}/v1/fedquery"), Some(&post_q("SELECT * FROM twomass"))).await;
    let msg = envelope(s, &b, 413, "row_cap_exceeded");
    assert!(msg.contains("twomass"), "{msg}");

    let slow = deploy(&cats, FederationSettings::default(), Duration::ZERO).await;
    let (s, b) = call("POST", &format!("{}/v1/fedquery", slow.portal), Some(&q)).await;
    envelope(s, &b, 408, "timeout");
}

#[tokio::test]
async fn stopped_node_is_named() {
    let cats = catalogs();
    let mut d = deploy(&cats, FederationSettings::default(), common::TIMEOUT).await;
    let url = format!("{}/v1/fedquery", d.portal);
    let q = post_q("SELECT sdss.object_id, twomass.object_id FROM XMATCH(sdss, first, twomass)");
    let (s, _) = call("POST", &url, Some(&q)).await;
    assert_eq!(s, 200);
    d.stops.pop().unwrap().send(()).unwrap();
    tokio::time::sleep(Duration::from_millis(100)).await;
    let (s, b) = call("POST", &url, Some(&q)).await;
    let msg = envelope(s, &b, 502, "node_unreachable");
    assert!(msg.contains("twomass"), "{msg}");
    let (s, b) = call("GET", &format!("{}/v1/surveys", d.portal), None).await;
    assert_eq!(s, 200, "cached metadata still serves: {b}");
}

#[tokio::test]
async fn unreachable_node_fails_planning() {
    let cats = catalogs();
    let closed = {
        let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        format!("http://{}", l.local_addr().unwrap())
    };
    let (sdss_url, _stop) = stoppable_node(&cats[0]).await;
    let nodes = vec![("sdss".to_owned(), sdss_url), ("first".to_owned(), closed)];
    let fed = federation_from_config(&config(&nodes, FederationSettings::default())).unwrap();
    let portal = common::spawn(portal_router(Arc::new(fed), None, common::TIMEOUT)).await;
    let (s, b) = call("POST", &format!("{portal}/v1/fedquery"), Some(&post_q("SELECT * FROM XMATCH(sdss, first)"))).await;
    let msg = envelope(s, &b, 502, "node_unreachable");
    assert!(msg.contains("first"), "{msg}");
    let (s, b) = call("GET", &format!("{portal}/v1/surveys"), None).await;
    envelope(s, &b, 502, "node_unreachable");
}

#[tokio::test]
async fn static_assets_are_served_at_root() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<h1>console</h1>").unwrap();
    std::fs::write(dir.path().join("app.js"), "console.log(1)").unwrap();
    let fed = Arc::new(support::local_federation(&catalogs()[..1], FederationSettings::default()));
    let with_assets = common::spawn(portal_router(fed.clone(), Some(dir.path().to_owned()), common::TIMEOUT)).await;
    let (s, body) = call("GET", &format!("{with_assets}/"), None).await;
    assert_eq!((s, body), (200, Json::String("<h1>console</h1>".into())));
    let (s, body) = call("GET", &format!("{with_assets}/app.js"), None).await;
    assert_eq!((s, body), (200, Json::String("console.log(1)".into())));
    let (s, _) = call("GET", &format!("{with_assets}/v1/surveys"), None).await;
    assert_eq!(s, 200);

    let bare = common::spawn(portal_router(fed, None, common::TIMEOUT)).await;
    let (s, body) = call("GET", &format!("{bare}/"), None).await;
    assert_eq!(s, 200);
    assert!(body.as_str().unwrap().contains("/v1/fedquery"));
}

#[tokio::test]
async fn portal_client_keeps_error_offsets() {
    let d = deploy(&catalogs(), FederationSettings::default(), common::TIMEOUT).await;
    let client = PortalClient::new(&d.portal, common::TIMEOUT).unwrap();
    match client.fedquery("SELECT * FROM XMATCH(sdss, first) WHERE").await.unwrap_err() {
        skyfed_service::PortalError::Rejected(body) => {
            assert_eq!(body.code, "parse_error");
            assert_eq!(body.offset, Some(39));
        }
        other => panic!("unexpected {other:?}"),
    }
    let dead = PortalClient::new("http://127.0.0.1:1", Duration::from_secs(2)).unwrap();
    assert!(matches!(dead.fedquery("SELECT 1").await, Err(skyfed_service::PortalError::Unreachable(_))));
}

/// Answers metadata and queries, then panics on the first cross-match.
struct PanickingClient(skyfed_core::federation::LocalNodeClient);

#[async_trait::async_trait]
impl skyfed_core::federation::NodeClient for PanickingClient {
    async fn metadata(&self) -> Result<skyfed_core::node::NodeMetadata, skyfed_core::federation::ClientError> {
        self.0.metadata().await
    }

    async fn query(&self, q: &str) -> Result<ResultTable, skyfed_core::federation::ClientError> {
        self.0.query(q).await
    }

    async fn xmatch(
        &self,
        _: &skyfed_core::node::XMatchRequest,
    ) -> Result<skyfed_core::node::XMatchResponse, skyfed_core::federation::ClientError> {
        panic!("node client bug");
    }
}

#[tokio::test]
async fn client_panic_is_an_internal_error() {
    use skyfed_core::federation::{Federation, LocalNodeClient, NodeClient};
    let cats = catalogs();
    let nodes = cats[..2]
        .iter()
        .map(|c| {
            let client: Arc<dyn NodeClient> = Arc::new(PanickingClient(LocalNodeClient::new(support::engine(c))));
            (c.schema.survey.clone(), client)
        })
        .collect();
    let fed = Arc::new(Federation::new(nodes, FederationSettings::default()));
    let base = common::spawn(portal_router(fed, None, common::TIMEOUT)).await;
    let (s, b) = call("POST", &format!("{base}/v1/fedquery"), Some(&post_q("SELECT * FROM XMATCH(sdss, first)"))).await;
    envelope(s, &b, 500, "internal_error");
    let (s, _) = call("POST", &format!("{base}/v1/fedquery"), Some(&post_q("SELECT * FROM sdss WHERE sdss.mag_r < 15"))).await;
    assert_eq!(s, 200);
}
