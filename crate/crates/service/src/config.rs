//! JSON configuration files for the node and portal services.

use std::collections::HashSet;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use skyfed_core::federation::{FederationSettings, NodeEntry, DEFAULT_BATCH_SIZE, DEFAULT_CONCURRENCY};
use skyfed_core::node::{DEFAULT_K, DEFAULT_MAX_RADIUS_ARCSEC, DEFAULT_ROW_CAP};
use skyfed_core::store::StoreError;
use skyfed_core::zone::DEFAULT_ZONE_HEIGHT_DEG;
use thiserror::Error;

pub const DEFAULT_TIMEOUT_MS: u64 = 30_000;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("cannot serve on {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
}

impl ConfigError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        ConfigError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

fn default_zone_height() -> f64 {
    DEFAULT_ZONE_HEIGHT_DEG
}

fn default_row_cap() -> usize {
    DEFAULT_ROW_CAP
}

fn default_timeout() -> u64 {
    DEFAULT_TIMEOUT_MS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeConfig {
    pub bind: SocketAddr,
    /// Store directory written by `skyfed ingest`.
    pub store: PathBuf,
    /// Optional source schema descriptor; when set, its survey and bands
    /// must agree with the store.
    #[serde(default)]
    pub schema: Option<PathBuf>,
    #[serde(default = "default_zone_height")]
    pub zone_height_deg: f64,
    #[serde(default = "default_row_cap")]
    pub row_cap: usize,
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
}

impl NodeConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let config: Self = read_json(path)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !self.store.is_dir() {
            return Err(ConfigError::Invalid(format!("store {} is not a directory", self.store.display())));
        }
        if let Some(schema) = &self.schema {
            if !schema.is_file() {
                return Err(ConfigError::Invalid(format!("schema {} does not exist", schema.display())));
            }
        }
        if !(self.zone_height_deg > 0.0 && self.zone_height_deg <= 180.0) {
            return Err(ConfigError::Invalid(format!("zone_height_deg must be in (0, 180], got {}", self.zone_height_deg)));
        }
        if self.row_cap == 0 {
            return Err(ConfigError::Invalid("row_cap must be positive".into()));
        }
        if self.timeout_ms == 0 {
            return Err(ConfigError::Invalid("timeout_ms must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "PortalConfigFile")]
pub struct PortalConfig {
    pub bind: SocketAddr,
    pub nodes: Vec<NodeEntry>,
    /// Directory of web console assets served at `/`.
    #[serde(default)]
    pub static_dir: Option<PathBuf>,
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
    #[serde(flatten)]
    pub settings: FederationSettings,
}

/// The on-disk shape: federation settings sit at the top level. Spelled out
/// field by field because `flatten` cannot reject unknown keys.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PortalConfigFile {
    bind: SocketAddr,
    nodes: Vec<NodeEntry>,
    #[serde(default)]
    static_dir: Option<PathBuf>,
    #[serde(default = "default_timeout")]
    timeout_ms: u64,
    #[serde(default = "default_concurrency")]
    concurrency: usize,
    #[serde(default = "default_batch_size")]
    batch_size: usize,
    #[serde(default = "default_k")]
    default_k: f64,
    #[serde(default = "default_max_radius")]
    default_max_radius_arcsec: f64,
    #[serde(default)]
    row_cap: Option<usize>,
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

impl From<PortalConfigFile> for PortalConfig {
    fn from(f: PortalConfigFile) -> Self {
        Self {
            bind: f.bind,
            nodes: f.nodes,
            static_dir: f.static_dir,
            timeout_ms: f.timeout_ms,
            settings: FederationSettings {
                concurrency: f.concurrency,
                batch_size: f.batch_size,
                default_k: f.default_k,
                default_max_radius_arcsec: f.default_max_radius_arcsec,
                row_cap: f.row_cap,
            },
        }
    }
}

impl PortalConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let config: Self = read_json(path)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.nodes.is_empty() {
            return Err(ConfigError::Invalid("at least one node is required".into()));
        }
        let mut seen = HashSet::new();
        for node in &self.nodes {
            if !seen.insert(node.survey.as_str()) {
                return Err(ConfigError::Invalid(format!("duplicate survey name: {}", node.survey)));
            }
        }
        let s = &self.settings;
        if s.concurrency == 0 || s.batch_size == 0 {
            return Err(ConfigError::Invalid("concurrency and batch_size must be positive".into()));
        }
        if !(s.default_k > 0.0 && s.default_max_radius_arcsec > 0.0) {
            return Err(ConfigError::Invalid("default_k and default_max_radius_arcsec must be positive".into()));
        }
        if self.timeout_ms == 0 {
            return Err(ConfigError::Invalid("timeout_ms must be positive".into()));
        }
        Ok(())
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| ConfigError::Json {
        path: path.display().to_string(),
        source,
    })
}
