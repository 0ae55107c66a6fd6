use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use mcdm_core::io::ScenarioError;
use mcdm_core::model::ProblemViolation;
use serde::Serialize;

/// Error body shared by every route: `{code, message, location}`.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorBody {
    pub code: &'static str,
    pub message: String,
    pub location: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<ProblemViolation>,
}

#[derive(Debug, Clone)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>, location: Option<String>) -> Self {
        ApiError { status, body: ErrorBody { code, message: message.into(), location, violations: Vec::new() } }
    }

    pub fn bad_request(message: impl Into<String>, location: Option<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message, location)
    }

    pub fn not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", format!("no problem session `{id}`"), Some("id".into()))
    }

    pub fn conflict(expected: u64, current: u64) -> Self {
        Self::new(
            StatusCode::CONFLICT,
            "version_conflict",
            format!("If-Match version {expected} is stale; current version is {current}"),
            Some("If-Match".into()),
        )
    }

    pub fn unprocessable(code: &'static str, message: impl Into<String>, location: Option<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, code, message, location)
    }

    pub fn invalid(violations: Vec<ProblemViolation>) -> Self {
        let message = violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ");
        let location = violations.first().map(|v| v.location.clone());
        let mut e = Self::unprocessable("validation_failed", message, location);
        e.body.violations = violations;
        e
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message, None)
    }
}

impl From<ScenarioError> for ApiError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Parse { line, column, .. } => {
                Self::new(StatusCode::BAD_REQUEST, "parse_error", e.to_string(), Some(format!("line {line}, column {column}")))
            }
            ScenarioError::Version(_) => Self::unprocessable("unsupported_version", e.to_string(), Some("format_version".into())),
            ScenarioError::Judgments { ref criterion, .. } => {
                let location = Some(format!("judgments.{criterion}"));
                Self::unprocessable("invalid_judgments", e.to_string(), location)
            }
            ScenarioError::Invalid(v) => Self::invalid(v),
            ScenarioError::Io { .. } => Self::internal(e.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}
