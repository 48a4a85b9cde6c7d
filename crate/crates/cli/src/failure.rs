//! Maps library errors onto the exit-code contract: 1 for domain and
//! validation errors, 2 for usage errors, 3 for upstream and IO failures.

use std::fmt;

use skyfed_core::federation::FedError;
use skyfed_core::fixture::FixtureError;
use skyfed_core::ingest::IngestError;
use skyfed_core::mining::MiningError;
use skyfed_core::node::NodeError;
use skyfed_core::query::caret;
use skyfed_core::store::StoreError;
use skyfed_service::{ConfigError, PortalError};

pub const EXIT_DOMAIN: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_UPSTREAM: u8 = 3;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn domain(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_DOMAIN,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn upstream(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_UPSTREAM,
            message: message.into(),
        }
    }

    /// A query failure, with a caret under `offset` when there is one.
    pub fn query(text: &str, offset: Option<usize>, message: &str) -> Self {
        match offset {
            Some(offset) => Self::domain(caret(text, offset, message)),
            None => Self::domain(format!("error: {message}")),
        }
    }

    pub fn node(text: &str, e: NodeError) -> Self {
        match e {
            NodeError::Parse(ref q) => Self::query(text, q.offset(), &q.message()),
            other => Self::query(text, None, &other.to_string()),
        }
    }

    pub fn federated(text: &str, e: FedError) -> Self {
        match e {
            FedError::Parse(ref q) => Self::query(text, q.offset(), &q.message()),
            FedError::NodeUnreachable { .. } | FedError::NodeFailed { .. } => Self::upstream(format!("error: {e}")),
            other => Self::query(text, None, &other.to_string()),
        }
    }

    pub fn portal(text: &str, e: PortalError) -> Self {
        match e {
            PortalError::Unreachable(m) => Self::upstream(format!("error: portal unreachable: {m}")),
            PortalError::Rejected(body) => match body.code.as_str() {
                "node_unreachable" | "timeout" | "internal_error" | "not_found" => {
                    Self::upstream(format!("error: {}: {}", body.code, body.message))
                }
                _ => Self::query(text, body.offset, &body.message),
            },
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<IngestError> for Failure {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::Io { .. } => Self::upstream(format!("error: {e}")),
            other => Self::domain(format!("error: {other}")),
        }
    }
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Ingest(i) => i.into(),
            StoreError::Io { .. } => Self::upstream(format!("error: {e}")),
            other => Self::domain(format!("error: {other}")),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Store(s) => s.into(),
            ConfigError::Io { .. } | ConfigError::Bind { .. } => Self::upstream(format!("error: {e}")),
            other => Self::domain(format!("error: {other}")),
        }
    }
}

impl From<MiningError> for Failure {
    fn from(e: MiningError) -> Self {
        Self::domain(format!("error: {e}"))
    }
}

impl From<FixtureError> for Failure {
    fn from(e: FixtureError) -> Self {
        Self::upstream(format!("error: {e}"))
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::upstream(format!("error: {e}"))
    }
}
