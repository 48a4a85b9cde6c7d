//! The portal side: federated query planning and cross-match execution
//! across nodes reached through [`NodeClient`].

mod execute;
mod plan;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::node::{NodeEngine, NodeError, NodeMetadata, XMatchRequest, XMatchResponse, DEFAULT_K, DEFAULT_MAX_RADIUS_ARCSEC};
use crate::query::{PlanError, QueryError};
use crate::table::ResultTable;

pub use execute::{execute_xmatch, run_federated};
pub use plan::{arrange, parse_federated, plan_xmatch, tuple_columns, FederatedQuery, TupleScope, XMatchPlan, SEPARATION_COLUMN};

pub const DEFAULT_BATCH_SIZE: usize = 1000;
pub const DEFAULT_CONCURRENCY: usize = 4;

/// A failure reported by, or on the way to, one node.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClientError {
    #[error("{message}")]
    Unreachable { message: String },
    /// The node answered with an error envelope.
    #[error("{code}: {message}")]
    Rejected { code: String, message: String },
}

impl From<NodeError> for ClientError {
    fn from(e: NodeError) -> Self {
        ClientError::Rejected {
            code: e.code().to_owned(),
            message: e.to_string(),
        }
    }
}

#[async_trait]
pub trait NodeClient: Send + Sync {
    async fn metadata(&self) -> Result<NodeMetadata, ClientError>;
    async fn query(&self, q: &str) -> Result<ResultTable, ClientError>;
    async fn xmatch(&self, req: &XMatchRequest) -> Result<XMatchResponse, ClientError>;
}

/// Calls an in-process engine directly.
pub struct LocalNodeClient {
    engine: Arc<NodeEngine>,
}

impl LocalNodeClient {
    pub fn new(engine: Arc<NodeEngine>) -> Self {
        Self { engine }
    }
}

#[async_trait]
impl NodeClient for LocalNodeClient {
    async fn metadata(&self) -> Result<NodeMetadata, ClientError> {
        Ok(self.engine.metadata())
    }

    async fn query(&self, q: &str) -> Result<ResultTable, ClientError> {
        Ok(self.engine.query(q)?)
    }

    async fn xmatch(&self, req: &XMatchRequest) -> Result<XMatchResponse, ClientError> {
        Ok(self.engine.xmatch(req)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeEntry {
    pub survey: String,
    pub url: String,
}

fn default_concurrency() -> usize {
    DEFAULT_CONCURRENCY
}

fn default_batch_size() -> usize {
    DEFAULT_BATCH_SIZE
}

fn default_k() -> f64 {
    DEFAULT_K
}

fn default_max_radius() -> f64 {
    DEFAULT_MAX_RADIUS_ARCSEC
}

/// Federation tuning shared by the portal service and in-process use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FederationSettings {
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_k")]
    pub default_k: f64,
    #[serde(default = "default_max_radius")]
    pub default_max_radius_arcsec: f64,
    /// Rows a federated result may hold.
    #[serde(default)]
    pub row_cap: Option<usize>,
}

impl Default for FederationSettings {
    fn default() -> Self {
        Self {
            concurrency: DEFAULT_CONCURRENCY,
            batch_size: DEFAULT_BATCH_SIZE,
            default_k: DEFAULT_K,
            default_max_radius_arcsec: DEFAULT_MAX_RADIUS_ARCSEC,
            row_cap: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum FedError {
    #[error(transparent)]
    Parse(#[from] QueryError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("node {survey} unreachable: {message}")]
    NodeUnreachable { survey: String, message: String },
    #[error("node {survey} failed: {code}: {message}")]
    NodeFailed {
        survey: String,
        code: String,
        message: String,
    },
    #[error("result exceeds the row cap of {cap}")]
    RowCapExceeded { cap: usize },
    #[error("node {survey} row cap exceeded; narrow the query")]
    NodeRowCap { survey: String },
}

impl FedError {
    pub fn code(&self) -> &'static str {
        match self {
            FedError::Parse(_) => "parse_error",
            FedError::Plan(_) => "plan_error",
            FedError::NodeUnreachable { .. } | FedError::NodeFailed { .. } => "node_unreachable",
            FedError::RowCapExceeded { .. } | FedError::NodeRowCap { .. } => "row_cap_exceeded",
        }
    }

    pub fn offset(&self) -> Option<usize> {
        match self {
            FedError::Parse(e) => e.offset(),
            _ => None,
        }
    }

    fn from_client(survey: &str, e: ClientError) -> Self {
        match e {
            ClientError::Unreachable { message } => FedError::NodeUnreachable {
                survey: survey.to_owned(),
                message,
            },
            ClientError::Rejected { code, .. } if code == "row_cap_exceeded" => FedError::NodeRowCap {
                survey: survey.to_owned(),
            },
            ClientError::Rejected { code, message } => FedError::NodeFailed {
                survey: survey.to_owned(),
                code,
                message,
            },
        }
    }
}

/// The set of nodes a portal mediates, with cached metadata.
pub struct Federation {
    nodes: Vec<(String, Arc<dyn NodeClient>)>,
    settings: FederationSettings,
    metadata: Mutex<HashMap<String, NodeMetadata>>,
}

impl Federation {
    pub fn new(nodes: Vec<(String, Arc<dyn NodeClient>)>, settings: FederationSettings) -> Self {
        Self {
            nodes,
            settings,
            metadata: Mutex::new(HashMap::new()),
        }
    }

    pub fn settings(&self) -> &FederationSettings {
        &self.settings
    }

    pub fn surveys(&self) -> impl Iterator<Item = &str> {
        self.nodes.iter().map(|(s, _)| s.as_str())
    }

    pub fn client(&self, survey: &str) -> Option<&Arc<dyn NodeClient>> {
        self.nodes.iter().find(|(s, _)| s == survey).map(|(_, c)| c)
    }

    /// Metadata for `survey`, fetched once and then served from cache
    /// (node catalogs are immutable).
    pub async fn metadata(&self, survey: &str) -> Result<NodeMetadata, FedError> {
        if let Some(m) = self.metadata.lock().expect("metadata lock").get(survey) {
            return Ok(m.clone());
        }
        let client = self
            .client(survey)
            .ok_or_else(|| PlanError::new(format!("unknown survey: {survey}")))?;
        let meta = client
            .metadata()
            .await
            .map_err(|e| FedError::from_client(survey, e))?;
        self.metadata
            .lock()
            .expect("metadata lock")
            .insert(survey.to_owned(), meta.clone());
        Ok(meta)
    }
}
