use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use oldphoto::Error;
use serde::Serialize;

/// Machine-readable error body: `{"code", "message", "stage"}`, plus the
/// backend's output for failed external runs.
#[derive(Debug, Serialize)]
pub struct ErrorBody {
    pub code: &'static str,
    pub message: String,
    pub stage: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<String>,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            body: ErrorBody {
                code,
                message: message.into(),
                stage: None,
                diagnostics: None,
            },
        }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

fn classify(err: &Error) -> (StatusCode, &'static str) {
    match err {
        Error::Lookup { kind: "session", .. } => (StatusCode::NOT_FOUND, "not_found"),
        Error::Lookup { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "unknown_name"),
        Error::State(_) => (StatusCode::CONFLICT, "state"),
        Error::Range(_) => (StatusCode::CONFLICT, "range"),
        Error::Param(_) | Error::Duplicate { .. } | Error::Validation(_) => {
            (StatusCode::UNPROCESSABLE_ENTITY, "invalid_params")
        }
        Error::Shape(_) => (StatusCode::UNPROCESSABLE_ENTITY, "shape"),
        Error::Input(_) | Error::Codec(_) | Error::Region(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_input"),
        Error::BackendFailure { .. } => (StatusCode::BAD_GATEWAY, "backend_failure"),
        Error::Protocol(_) => (StatusCode::BAD_GATEWAY, "backend_protocol"),
        Error::Timeout { .. } => (StatusCode::BAD_GATEWAY, "backend_timeout"),
        Error::Io { .. } => (StatusCode::INTERNAL_SERVER_ERROR, "io"),
        Error::Stage { source, .. } => classify(source),
    }
}

impl From<Error> for ApiError {
    fn from(err: Error) -> Self {
        let (status, code) = classify(&err);
        let diagnostics = match err.root() {
            Error::BackendFailure { diagnostics, .. } => Some(diagnostics.clone()),
            _ => None,
        };
        let message = match err.root() {
            // Server paths stay private.
            Error::Io { .. } => "storage error".to_string(),
            root => root.to_string(),
        };
        if status.is_server_error() {
            tracing::warn!("{err}");
        }
        Self {
            status,
            body: ErrorBody {
                code,
                message,
                stage: err.stage().map(str::to_string),
                diagnostics,
            },
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}
