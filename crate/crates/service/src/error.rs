use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use leia_core::client_sim::{ProviderError, SimError};
use leia_core::scenario::ValidationError;
use leia_core::ParseError;
use serde::Serialize;
use serde_json::Value;

use crate::store::StoreError;

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("invalid request body: {0}")]
    BadRequest(String),
    #[error("scenario `{0}` not found")]
    ScenarioNotFound(String),
    #[error("scenario `{0}` already exists with different content")]
    ScenarioExists(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(ValidationError),
    #[error("session `{0}` not found")]
    SessionNotFound(String),
    #[error("session has no evaluation yet")]
    NoEvaluation,
    #[error("no submitted sessions for scenario `{0}`")]
    NoData(String),
    #[error("this session reads a transcript; it has no chat")]
    WrongMode,
    #[error("the session deadline has passed")]
    Expired,
    #[error("another request for this session is in progress")]
    Busy,
    #[error("the session has already been submitted")]
    AlreadySubmitted,
    #[error("the previous message is still waiting for a reply; resend it to retry")]
    ReplyPending,
    #[error("message text is empty")]
    EmptyMessage,
    #[error("diagram does not parse: {0}")]
    Diagram(ParseError),
    #[error("chat provider failed: {0}")]
    Provider(ProviderError),
    #[error("generated transcript is malformed: {0}")]
    Transcript(String),
    #[error("storage failure: {0}")]
    Storage(#[from] StoreError),
    #[error("internal error: {0}")]
    Internal(String),
}

#[derive(Debug, Serialize)]
struct ErrorBody<'a> {
    code: &'a str,
    message: String,
    detail: Value,
}

impl ApiError {
    pub fn code(&self) -> &'static str {
        match self {
            ApiError::BadRequest(_) => "invalid_request",
            ApiError::ScenarioNotFound(_) => "scenario_not_found",
            ApiError::ScenarioExists(_) => "scenario_exists",
            ApiError::InvalidScenario(_) => "invalid_scenario",
            ApiError::SessionNotFound(_) => "session_not_found",
            ApiError::NoEvaluation => "evaluation_not_found",
            ApiError::NoData(_) => "no_data",
            ApiError::WrongMode => "wrong_mode",
            ApiError::Expired => "session_expired",
            ApiError::Busy => "session_busy",
            ApiError::AlreadySubmitted => "already_submitted",
            ApiError::ReplyPending => "reply_pending",
            ApiError::EmptyMessage => "empty_message",
            ApiError::Diagram(_) => "diagram_parse_error",
            ApiError::Provider(_) => "provider_error",
            ApiError::Transcript(_) => "transcript_error",
            ApiError::Storage(_) => "storage_error",
            ApiError::Internal(_) => "internal_error",
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::BadRequest(_) | ApiError::EmptyMessage => StatusCode::BAD_REQUEST,
            ApiError::ScenarioNotFound(_)
            | ApiError::SessionNotFound(_)
            | ApiError::NoEvaluation
            | ApiError::NoData(_) => StatusCode::NOT_FOUND,
            ApiError::ScenarioExists(_)
            | ApiError::WrongMode
            | ApiError::Expired
            | ApiError::Busy
            | ApiError::AlreadySubmitted
            | ApiError::ReplyPending => StatusCode::CONFLICT,
            ApiError::InvalidScenario(_) | ApiError::Diagram(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Provider(_) | ApiError::Transcript(_) => StatusCode::BAD_GATEWAY,
            ApiError::Storage(_) | ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    fn detail(&self) -> Value {
        match self {
            ApiError::InvalidScenario(e) => serde_json::to_value(e).unwrap_or(Value::Null),
            ApiError::Diagram(e) => serde_json::to_value(e).unwrap_or(Value::Null),
            _ => Value::Null,
        }
    }
}

impl From<SimError> for ApiError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Provider(p) => ApiError::Provider(p),
            SimError::Transcript(t) => ApiError::Transcript(t.to_string()),
            SimError::EmptyMessage => ApiError::EmptyMessage,
            SimError::Alternation(_) => ApiError::ReplyPending,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            code: self.code(),
            message: self.to_string(),
            detail: self.detail(),
        };
        (self.status(), Json(body)).into_response()
    }
}
