//! JSON routes. Errors render as `{"error": {"kind": ..., "message": ...}}`.

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use belief_dialog::dialog::{AdvisorReply, DialogSession};
use serde::Deserialize;
use serde_json::json;

use crate::service::{AdvisorService, Health, ServiceError};

#[derive(Debug, Deserialize)]
pub struct MessageRequest {
    pub text: String,
}

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::Conflict(_) => StatusCode::CONFLICT,
            ServiceError::Validation(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::Store(_) => StatusCode::SERVICE_UNAVAILABLE,
            ServiceError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let body = json!({ "error": { "kind": self.kind(), "message": self.to_string() } });
        (self.status(), Json(body)).into_response()
    }
}

type Shared = State<Arc<AdvisorService>>;

async fn create(State(svc): Shared) -> Result<(StatusCode, Json<DialogSession>), ServiceError> {
    Ok((StatusCode::CREATED, Json(svc.create_session()?)))
}

async fn message(
    State(svc): Shared,
    Path(id): Path<String>,
    body: Result<Json<MessageRequest>, JsonRejection>,
) -> Result<Json<AdvisorReply>, ServiceError> {
    let Json(req) = body.map_err(|e| ServiceError::Validation(e.body_text()))?;
    Ok(Json(svc.post_message(&id, &req.text).await?))
}

async fn session(State(svc): Shared, Path(id): Path<String>) -> Result<Json<DialogSession>, ServiceError> {
    Ok(Json(svc.get_session(&id).await?))
}

async fn health(State(svc): Shared) -> Json<Health> {
    Json(svc.health())
}

async fn fallback() -> Response {
    let body = json!({ "error": { "kind": "not_found", "message": "no such route" } });
    (StatusCode::NOT_FOUND, Json(body)).into_response()
}

pub fn router(service: Arc<AdvisorService>) -> Router {
    Router::new()
        .route("/api/sessions", post(create))
        .route("/api/sessions/{id}/messages", post(message))
        .route("/api/sessions/{id}", get(session))
        .route("/api/health", get(health))
        .fallback(fallback)
        .with_state(service)
}
