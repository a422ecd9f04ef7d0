//! HTTP routes. Every error body is `{code, message, detail}`.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use leia_core::{EvaluationReport, Submission};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::error::ApiError;
use crate::service::{AnalyticsView, Leia, MessageOutcome, NewSession, ScenarioSummary, TranscriptView};
use crate::session::SessionDescriptor;

type AppState = Arc<Leia>;
type ApiResult<T> = Result<T, ApiError>;

pub fn router(leia: Arc<Leia>) -> Router {
    Router::new()
        .route("/scenarios", get(list_scenarios).post(post_scenario))
        .route("/scenarios/{id}", get(get_scenario))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/messages", post(post_message))
        .route("/sessions/{id}/transcript", get(get_transcript))
        .route("/sessions/{id}/submission", post(submit))
        .route("/sessions/{id}/evaluation", get(get_evaluation))
        .route("/analytics/{scenario_id}", get(get_analytics))
        .with_state(leia)
}

fn body<T: DeserializeOwned>(bytes: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(bytes).map_err(|e| ApiError::BadRequest(e.to_string()))
}

async fn list_scenarios(State(leia): State<AppState>) -> Json<Vec<ScenarioSummary>> {
    Json(leia.list_scenarios())
}

async fn post_scenario(
    State(leia): State<AppState>,
    bytes: Bytes,
) -> ApiResult<(StatusCode, Json<ScenarioSummary>)> {
    let text = std::str::from_utf8(&bytes).map_err(|e| ApiError::BadRequest(e.to_string()))?;
    let (summary, created) = leia.register_scenario(text)?;
    let status = if created { StatusCode::CREATED } else { StatusCode::OK };
    Ok((status, Json(summary)))
}

async fn get_scenario(State(leia): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<ScenarioSummary>> {
    Ok(Json(leia.scenario_summary(&id)?))
}

async fn create_session(
    State(leia): State<AppState>,
    bytes: Bytes,
) -> ApiResult<(StatusCode, Json<SessionDescriptor>)> {
    let request: NewSession = body(&bytes)?;
    Ok((StatusCode::CREATED, Json(leia.create_session(request).await?)))
}

async fn get_session(State(leia): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<SessionDescriptor>> {
    Ok(Json(leia.session(&id)?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MessageBody {
    text: String,
}

async fn post_message(
    State(leia): State<AppState>,
    Path(id): Path<String>,
    bytes: Bytes,
) -> ApiResult<Json<MessageOutcome>> {
    let MessageBody { text } = body(&bytes)?;
    Ok(Json(leia.post_message(&id, &text).await?))
}

async fn get_transcript(State(leia): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<TranscriptView>> {
    Ok(Json(leia.transcript(&id)?))
}

async fn submit(
    State(leia): State<AppState>,
    Path(id): Path<String>,
    bytes: Bytes,
) -> ApiResult<Json<EvaluationReport>> {
    let submission: Submission = body(&bytes)?;
    Ok(Json(leia.submit(&id, submission).await?))
}

async fn get_evaluation(State(leia): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<EvaluationReport>> {
    Ok(Json(leia.evaluation(&id)?))
}

async fn get_analytics(
    State(leia): State<AppState>,
    Path(scenario_id): Path<String>,
) -> ApiResult<Json<AnalyticsView>> {
    Ok(Json(leia.group_analytics(&scenario_id).await?))
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(addr: &str, leia: Arc<Leia>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(leia)).await
}
