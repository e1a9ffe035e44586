//! JSON over HTTP.
//!
//! * `POST /v1/turn` runs one turn; `?debug=true` adds the turn's debug record.
//! * `GET /v1/session/{id}/log` returns every logged turn of a session.
//! * `GET /v1/health` reports liveness and index size.
//!
//! Errors are `{"error": {"code", "message"}}` with a 4xx or 5xx status.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use socialbot_core::manager::{Engine, EngineError, SessionOverrides, TurnDebug, TurnInput, TurnOutcome};
use socialbot_core::store::{ConversationLogEntry, StoreError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TurnRequest {
    pub session_id: String,
    pub user_utterance: String,
    /// Experiment arms and seed; only read on a session's first turn.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<SessionOverrides>,
}

impl TurnRequest {
    pub fn input(&self) -> TurnInput {
        TurnInput {
            session_id: self.session_id.clone(),
            utterance: self.user_utterance.clone(),
            overrides: self.config.clone().unwrap_or_default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnResponse {
    pub session_id: String,
    pub turn_number: u64,
    pub bot_utterance: String,
    pub conversation_ended: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub turn_debug: Option<TurnDebug>,
}

impl TurnResponse {
    pub fn from_outcome(outcome: TurnOutcome, debug: bool) -> Self {
        Self {
            session_id: outcome.session_id,
            turn_number: outcome.turn_number,
            bot_utterance: outcome.bot_utterance,
            conversation_ended: outcome.conversation_ended,
            turn_debug: debug.then_some(outcome.debug),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionLog {
    pub session_id: String,
    pub turns: Vec<ConversationLogEntry>,
}

#[derive(Debug, Default, Deserialize)]
struct TurnQuery {
    #[serde(default)]
    debug: bool,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self { status, code, message: message.into() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": { "code": self.code, "message": self.message } });
        (self.status, Json(body)).into_response()
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let (status, code) = match &e {
            EngineError::EmptySession => (StatusCode::BAD_REQUEST, "empty_session_id"),
            EngineError::Ended(_) => (StatusCode::CONFLICT, "conversation_ended"),
            EngineError::Store(StoreError::Conflict { .. }) => (StatusCode::CONFLICT, "turn_conflict"),
            EngineError::Store(_) => (StatusCode::INTERNAL_SERVER_ERROR, "store_error"),
            EngineError::Selection(_) => (StatusCode::INTERNAL_SERVER_ERROR, "selection_failed"),
        };
        Self::new(status, code, e.to_string())
    }
}

fn internal(e: impl std::fmt::Display) -> ApiError {
    ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())
}

pub fn router(engine: Arc<Engine>) -> Router {
    Router::new()
        .route("/v1/turn", post(turn))
        .route("/v1/session/{id}/log", get(session_log))
        .route("/v1/health", get(health))
        .with_state(engine)
}

async fn turn(
    State(engine): State<Arc<Engine>>,
    query: Result<Query<TurnQuery>, QueryRejection>,
    body: Bytes,
) -> Result<Json<TurnResponse>, ApiError> {
    let Query(query) = query.map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bad_query", e.body_text()))?;
    let request: TurnRequest = serde_json::from_slice(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "malformed_body", e.to_string()))?;
    if request.session_id.trim().is_empty() {
        return Err(EngineError::EmptySession.into());
    }
    let input = request.input();
    let outcome = tokio::task::spawn_blocking(move || engine.process(&input)).await.map_err(internal)??;
    Ok(Json(TurnResponse::from_outcome(outcome, query.debug)))
}

async fn session_log(State(engine): State<Arc<Engine>>, Path(id): Path<String>) -> Result<Json<SessionLog>, ApiError> {
    let store = engine.store().clone();
    let lookup = id.clone();
    let turns = tokio::task::spawn_blocking(move || store.log(&lookup))
        .await
        .map_err(internal)?
        .map_err(|e| ApiError::from(EngineError::Store(e)))?;
    if turns.is_empty() {
        return Err(ApiError::new(StatusCode::NOT_FOUND, "unknown_session", format!("no turns logged for `{id}`")));
    }
    Ok(Json(SessionLog { session_id: id, turns }))
}

async fn health(State(engine): State<Arc<Engine>>) -> Json<serde_json::Value> {
    let index = &engine.world().index;
    let anchortexts: usize = index.entities().iter().map(|e| e.anchortexts.len()).sum();
    Json(json!({
        "status": "ok",
        "index": { "entities": index.len(), "anchortexts": anchortexts },
    }))
}
