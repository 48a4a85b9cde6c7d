//! reqwest clients for the node and portal endpoints.

use std::time::Duration;

use async_trait::async_trait;
use reqwest::{RequestBuilder, StatusCode};
use serde::de::DeserializeOwned;
use skyfed_core::federation::{ClientError, NodeClient};
use skyfed_core::node::{NodeMetadata, XMatchRequest, XMatchResponse};
use skyfed_core::table::ResultTable;

use thiserror::Error;

use crate::error::{ErrorBody, ErrorEnvelope};
use crate::node::QueryBody;
use crate::portal::SurveysBody;

fn unreachable(e: impl std::fmt::Display) -> ClientError {
    ClientError::Unreachable { message: e.to_string() }
}

fn http(timeout: Duration) -> Result<reqwest::Client, ClientError> {
    reqwest::Client::builder().timeout(timeout).build().map_err(unreachable)
}

/// A failed portal call. Unlike [`ClientError`] it keeps the whole error
/// body, so callers can point at the reported query offset.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PortalError {
    #[error("{0}")]
    Unreachable(String),
    #[error("{}: {}", .0.code, .0.message)]
    Rejected(ErrorBody),
}

impl From<PortalError> for ClientError {
    fn from(e: PortalError) -> Self {
        match e {
            PortalError::Unreachable(message) => ClientError::Unreachable { message },
            PortalError::Rejected(body) => ClientError::Rejected {
                code: body.code,
                message: body.message,
            },
        }
    }
}

/// Sends `req` and decodes either the success body or the error envelope.
async fn send_raw<T: DeserializeOwned>(req: RequestBuilder) -> Result<T, PortalError> {
    let resp = req.send().await.map_err(|e| PortalError::Unreachable(e.to_string()))?;
    let status = resp.status();
    let bytes = resp.bytes().await.map_err(|e| PortalError::Unreachable(e.to_string()))?;
    if status == StatusCode::OK {
        return serde_json::from_slice(&bytes).map_err(|e| PortalError::Unreachable(format!("malformed response: {e}")));
    }
    match serde_json::from_slice::<ErrorEnvelope>(&bytes) {
        Ok(env) => Err(PortalError::Rejected(env.error)),
        Err(_) => Err(PortalError::Unreachable(format!("HTTP {status}"))),
    }
}

async fn send<T: DeserializeOwned>(req: RequestBuilder) -> Result<T, ClientError> {
    Ok(send_raw(req).await?)
}

fn trim(base: &str) -> String {
    base.trim_end_matches('/').to_owned()
}

/// A node reached over HTTP.
#[derive(Debug, Clone)]
pub struct HttpNodeClient {
    base: String,
    http: reqwest::Client,
}

impl HttpNodeClient {
    pub fn new(base_url: &str, timeout: Duration) -> Result<Self, ClientError> {
        Ok(Self {
            base: trim(base_url),
            http: http(timeout)?,
        })
    }

    pub async fn cone(&self, ra_deg: f64, dec_deg: f64, radius_deg: f64) -> Result<ResultTable, ClientError> {
        let url = format!("{}/v1/cone?ra={ra_deg}&dec={dec_deg}&r_deg={radius_deg}", self.base);
        send(self.http.get(url)).await
    }
}

#[async_trait]
impl NodeClient for HttpNodeClient {
    async fn metadata(&self) -> Result<NodeMetadata, ClientError> {
        send(self.http.get(format!("{}/v1/metadata", self.base))).await
    }

    async fn query(&self, q: &str) -> Result<ResultTable, ClientError> {
        let body = QueryBody { q: q.to_owned() };
        send(self.http.post(format!("{}/v1/query", self.base)).json(&body)).await
    }

    async fn xmatch(&self, req: &XMatchRequest) -> Result<XMatchResponse, ClientError> {
        send(self.http.post(format!("{}/v1/xmatch", self.base)).json(req)).await
    }
}

/// A portal reached over HTTP.
#[derive(Debug, Clone)]
pub struct PortalClient {
    base: String,
    http: reqwest::Client,
}

impl PortalClient {
    pub fn new(base_url: &str, timeout: Duration) -> Result<Self, PortalError> {
        let http = reqwest::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| PortalError::Unreachable(e.to_string()))?;
        Ok(Self {
            base: trim(base_url),
            http,
        })
    }

    pub async fn surveys(&self) -> Result<Vec<NodeMetadata>, PortalError> {
        let body: SurveysBody = send_raw(self.http.get(format!("{}/v1/surveys", self.base))).await?;
        Ok(body.surveys)
    }

    pub async fn fedquery(&self, q: &str) -> Result<ResultTable, PortalError> {
        let body = QueryBody { q: q.to_owned() };
        send_raw(self.http.post(format!("{}/v1/fedquery", self.base)).json(&body)).await
    }
}
