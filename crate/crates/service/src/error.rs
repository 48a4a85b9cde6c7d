//! The error envelope shared by every endpoint:
//! `{"error": {"code": ..., "message": ..., "offset": ...}}`.
//!
//! | code               | status |
//! |--------------------|--------|
//! | `parse_error`      | 400    |
//! | `plan_error`       | 400    |
//! | `invalid_parameter`| 400    |
//! | `invalid_json`     | 400    |
//! | `not_found`        | 404    |
//! | `timeout`          | 408    |
//! | `row_cap_exceeded` | 413    |
//! | `internal_error`   | 500    |
//! | `node_unreachable` | 502    |

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};
use skyfed_core::federation::FedError;
use skyfed_core::node::NodeError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    /// Byte offset into the query text, for parse errors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorEnvelope {
    pub error: ErrorBody,
}

/// HTTP status for an envelope code. Unknown codes map to 500.
pub fn status_for(code: &str) -> StatusCode {
    match code {
        "parse_error" | "plan_error" | "invalid_parameter" | "invalid_json" => StatusCode::BAD_REQUEST,
        "not_found" => StatusCode::NOT_FOUND,
        "timeout" => StatusCode::REQUEST_TIMEOUT,
        "row_cap_exceeded" => StatusCode::PAYLOAD_TOO_LARGE,
        "node_unreachable" => StatusCode::BAD_GATEWAY,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApiError(pub ErrorBody);

impl ApiError {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        Self(ErrorBody {
            code: code.to_owned(),
            message: message.into(),
            offset: None,
        })
    }

    pub fn invalid_json(message: impl Into<String>) -> Self {
        Self::new("invalid_json", message)
    }

    pub fn invalid_parameter(message: impl Into<String>) -> Self {
        Self::new("invalid_parameter", message)
    }

    pub fn timeout(ms: u64) -> Self {
        Self::new("timeout", format!("request exceeded {ms} ms"))
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new("internal_error", message)
    }

    pub fn not_found(path: &str) -> Self {
        Self::new("not_found", format!("no such endpoint: {path}"))
    }

    pub fn status(&self) -> StatusCode {
        status_for(&self.0.code)
    }
}

impl From<NodeError> for ApiError {
    fn from(e: NodeError) -> Self {
        Self(ErrorBody {
            code: e.code().to_owned(),
            message: e.to_string(),
            offset: e.offset(),
        })
    }
}

impl From<FedError> for ApiError {
    fn from(e: FedError) -> Self {
        Self(ErrorBody {
            code: e.code().to_owned(),
            message: e.to_string(),
            offset: e.offset(),
        })
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = self.status();
        if status.is_server_error() {
            tracing::error!(code = %self.0.code, message = %self.0.message, "request failed");
        } else {
            tracing::debug!(code = %self.0.code, message = %self.0.message, "request rejected");
        }
        (status, Json(ErrorEnvelope { error: self.0 })).into_response()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offset_is_omitted_when_absent() {
        let body = serde_json::to_value(ErrorEnvelope {
            error: ApiError::invalid_json("bad").0,
        })
        .unwrap();
        assert_eq!(body, serde_json::json!({"error": {"code": "invalid_json", "message": "bad"}}));
    }

    #[test]
    fn every_code_has_its_status() {
        for (code, status) in [
            ("parse_error", 400),
            ("plan_error", 400),
            ("invalid_parameter", 400),
            ("invalid_json", 400),
            ("not_found", 404),
            ("timeout", 408),
            ("row_cap_exceeded", 413),
            ("internal_error", 500),
            ("node_unreachable", 502),
        ] {
            assert_eq!(status_for(code).as_u16(), status, "{code}");
        }
    }
}
