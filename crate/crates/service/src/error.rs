use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::{json, Value};

use penny_core::estimate::{CompareError, EstimateError};
use penny_core::pipeline::AnalysisError;

/// A JSON error body with an HTTP status. Bodies always carry `error` (a
/// machine-readable tag) and `message`.
#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: Value,
}

impl ApiError {
    pub fn new(status: StatusCode, error: &str, message: impl Into<String>) -> Self {
        ApiError { status, body: json!({ "error": error, "message": message.into() }) }
    }

    pub fn with(mut self, key: &str, value: impl serde::Serialize) -> Self {
        self.body[key] = serde_json::to_value(value).expect("error fields serialize");
        self
    }

    pub fn not_found(error: &str, message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, error, message)
    }

    pub fn bad_request(error: &str, message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, error, message)
    }

    pub fn unprocessable(error: &str, message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, error, message)
    }

    pub fn conflict(error: &str, message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::CONFLICT, error, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", message)
    }
}

impl From<AnalysisError> for ApiError {
    fn from(e: AnalysisError) -> Self {
        ApiError { status: StatusCode::UNPROCESSABLE_ENTITY, body: e.to_json() }
    }
}

impl From<EstimateError> for ApiError {
    fn from(e: EstimateError) -> Self {
        let status = match &e {
            EstimateError::UnresolvedAssumption { .. } => StatusCode::CONFLICT,
            EstimateError::InvalidMonth => StatusCode::BAD_REQUEST,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        let mut body = match &e {
            EstimateError::Unpriced(bind) => json!({ "error": "UnpricedFactor", "vendor_id": bind.vendor_id, "gaps": bind.gaps }),
            other => serde_json::to_value(other).expect("errors serialize"),
        };
        body["message"] = Value::String(e.to_string());
        ApiError { status, body }
    }
}

impl From<CompareError> for ApiError {
    fn from(e: CompareError) -> Self {
        match e {
            CompareError::Estimate(e) => e.into(),
            CompareError::Unpriced(errors) => {
                let message = errors.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; ");
                ApiError::unprocessable("UnpricedFactor", message).with("vendors", errors)
            }
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}
