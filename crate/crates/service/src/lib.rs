//! HTTP facade over [`SessionRegistry`]. Every route maps onto one session
//! call; clients follow background refreshes by polling the revision.

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use modelassist_core::gateway::GatewayError;
use modelassist_core::logging::render_log;
use modelassist_core::model::ModelError;
use modelassist_core::recommend::{RecommendError, SuggestionSet};
use modelassist_core::session::{EditOp, Session, SessionError, SessionRegistry, SuggestionMode};
use modelassist_core::text::{from_interchange, parse_model, serialize_model, to_interchange, TextError};

/// Error body: `{"code": ..., "message": ..., "attempts"?: n}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attempts: Option<u32>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            attempts: None,
        }
    }

    fn unknown_session(id: &str) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "unknown-session", format!("no session `{id}`"))
    }

    fn validation(code: &'static str, message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, code, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

fn model_code(e: &ModelError) -> &'static str {
    match e {
        ModelError::EmptyName => "empty-name",
        ModelError::InvalidName(_) => "invalid-name",
        ModelError::DuplicateName(_) => "duplicate-name",
        ModelError::UnknownClass(_) => "unknown-class",
        ModelError::DuplicateAttribute { .. } => "duplicate-attribute",
        ModelError::UnknownAttribute { .. } => "unknown-attribute",
        ModelError::SelfLoopForbidden(_) => "self-loop",
        ModelError::DuplicatePair { .. } => "duplicate-association",
        ModelError::UnknownAssociation { .. } => "unknown-association",
        ModelError::UnknownCandidate(_) => "unknown-candidate",
        ModelError::AlreadyInModel(_) => "already-in-model",
    }
}

impl From<GatewayError> for ApiError {
    fn from(e: GatewayError) -> Self {
        let code = match &e {
            GatewayError::Provider { .. } => "provider-error",
            GatewayError::Timeout { .. } => "provider-timeout",
            GatewayError::Auth(_) => "provider-auth",
            GatewayError::MockMiss { .. } => "mock-miss",
            GatewayError::InvalidParams(_) => "invalid-params",
        };
        ApiError {
            attempts: Some(e.attempts()),
            ..ApiError::new(StatusCode::BAD_GATEWAY, code, e.to_string())
        }
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let message = e.to_string();
        match e {
            SessionError::WrongMode { .. } => ApiError::new(StatusCode::CONFLICT, "wrong-mode", message),
            SessionError::SessionEnded => ApiError::new(StatusCode::CONFLICT, "session-ended", message),
            SessionError::Model(ModelError::UnknownCandidate(_)) => {
                ApiError::new(StatusCode::NOT_FOUND, "unknown-candidate", message)
            }
            SessionError::Model(m) => ApiError::validation(model_code(&m), message),
            SessionError::Recommend(RecommendError::Gateway(g)) => g.into(),
            SessionError::Recommend(RecommendError::EmptyModel) => ApiError::validation("empty-model", message),
            SessionError::Recommend(RecommendError::Prompt(_)) => ApiError::validation("prompt", message),
            SessionError::Log(_) => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "log-io", message),
        }
    }
}

impl From<TextError> for ApiError {
    fn from(e: TextError) -> Self {
        let code = match e {
            TextError::Parse(_) => "parse-error",
            TextError::Semantic { .. } => "semantic-error",
            TextError::Interchange(_) => "invalid-interchange",
        };
        ApiError::validation(code, e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::validation("invalid-body", e.body_text())
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Clone)]
pub struct AppState {
    pub registry: Arc<SessionRegistry>,
}

impl AppState {
    fn session(&self, id: &str) -> ApiResult<Arc<Session>> {
        self.registry.get(id).ok_or_else(|| ApiError::unknown_session(id))
    }
}

pub fn router(registry: Arc<SessionRegistry>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(session_view))
        .route("/sessions/{id}/model", get(poll_model))
        .route("/sessions/{id}/source", get(model_source))
        .route("/sessions/{id}/edits", post(apply_edit))
        .route("/sessions/{id}/suggestions", get(suggestions))
        .route("/sessions/{id}/suggestions/{candidate}/accept", post(accept))
        .route("/sessions/{id}/suggestions/{candidate}/dismiss", post(dismiss))
        .route("/sessions/{id}/mode", post(set_mode))
        .route("/sessions/{id}/finalize", post(finalize))
        .route("/sessions/{id}/log", get(log_csv))
        .with_state(AppState { registry })
}

/// Serves until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, registry: Arc<SessionRegistry>) -> std::io::Result<()> {
    serve_until(listener, registry, std::future::pending()).await
}

/// Serves until `shutdown` resolves, then lets in-flight requests finish.
pub async fn serve_until<F>(listener: tokio::net::TcpListener, registry: Arc<SessionRegistry>, shutdown: F) -> std::io::Result<()>
where
    F: std::future::Future<Output = ()> + Send + 'static,
{
    if let Ok(addr) = listener.local_addr() {
        tracing::info!(%addr, "listening");
    }
    axum::serve(listener, router(registry)).with_graceful_shutdown(shutdown).await
}

async fn health(State(state): State<AppState>) -> Json<Value> {
    Json(json!({ "status": "ok", "sessions": state.registry.len() }))
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct CreateSession {
    /// Model in the text notation.
    pub model_source: Option<String>,
    /// Model in the interchange form; ignored when `model_source` is set.
    pub model: Option<Value>,
    pub mode: Option<String>,
}

fn parse_mode(token: &str) -> ApiResult<SuggestionMode> {
    SuggestionMode::from_token(token)
        .ok_or_else(|| ApiError::validation("unknown-mode", format!("unknown mode `{token}`; expected none, request, auto or end")))
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct ModelBody {
    id: String,
    revision: u64,
    mode: SuggestionMode,
    ended: bool,
    refresh_pending: bool,
    model: Value,
}

fn model_body(session: &Session) -> ModelBody {
    let view = session.view();
    ModelBody {
        id: view.id,
        revision: view.revision,
        mode: view.mode,
        ended: view.ended,
        refresh_pending: view.refresh_pending,
        model: to_interchange(&view.model),
    }
}

async fn create_session(
    State(state): State<AppState>,
    body: Result<Json<CreateSession>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<ModelBody>)> {
    let Json(body) = body?;
    let mode = body.mode.as_deref().map(parse_mode).transpose()?;
    let model = match (&body.model_source, &body.model) {
        (Some(source), _) => Some(parse_model(source)?),
        (None, Some(value)) => Some(from_interchange(value)?),
        (None, None) => None,
    };
    let session = state.registry.create(model, mode)?;
    Ok((StatusCode::CREATED, Json(model_body(&session))))
}

async fn session_view(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(state.session(&id)?.view()).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct Since {
    since_revision: Option<u64>,
}

/// 204 while the revision is still `sinceRevision`; revisions only grow.
async fn poll_model(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(since): Query<Since>,
) -> ApiResult<Response> {
    let session = state.session(&id)?;
    let body = model_body(&session);
    if since.since_revision.is_some_and(|r| body.revision <= r) {
        return Ok(StatusCode::NO_CONTENT.into_response());
    }
    Ok(Json(body).into_response())
}

async fn model_source(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let text = serialize_model(&state.session(&id)?.model());
    Ok(([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], text).into_response())
}

#[derive(Debug, Serialize)]
struct Revision {
    revision: u64,
}

async fn apply_edit(
    State(state): State<AppState>,
    Path(id): Path<String>,
    op: Result<Json<EditOp>, JsonRejection>,
) -> ApiResult<Json<Revision>> {
    let session = state.session(&id)?;
    let Json(op) = op?;
    let revision = session.apply_edit(op).await?;
    Ok(Json(Revision { revision }))
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct SuggestionBody {
    revision: u64,
    refresh_pending: bool,
    #[serde(flatten)]
    suggestions: SuggestionSet,
}

async fn suggestions(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<SuggestionBody>> {
    let view = state.session(&id)?.view();
    Ok(Json(SuggestionBody {
        revision: view.revision,
        refresh_pending: view.refresh_pending,
        suggestions: view.suggestions,
    }))
}

async fn accept(State(state): State<AppState>, Path((id, candidate)): Path<(String, String)>) -> ApiResult<Json<Revision>> {
    let session = state.session(&id)?;
    let revision = session.apply_edit(session.accept_op(&candidate)).await?;
    Ok(Json(Revision { revision }))
}

async fn dismiss(State(state): State<AppState>, Path((id, candidate)): Path<(String, String)>) -> ApiResult<Json<Revision>> {
    let session = state.session(&id)?;
    let revision = session
        .apply_edit(EditOp::Dismiss {
            candidate_id: candidate,
        })
        .await?;
    Ok(Json(Revision { revision }))
}

#[derive(Debug, Deserialize)]
struct ModeBody {
    mode: String,
}

async fn set_mode(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<ModeBody>, JsonRejection>,
) -> ApiResult<Json<Revision>> {
    let session = state.session(&id)?;
    let Json(body) = body?;
    let revision = session.set_mode(parse_mode(&body.mode)?)?;
    Ok(Json(Revision { revision }))
}

async fn finalize(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<SuggestionSet>> {
    let session = state.session(&id)?;
    Ok(Json(session.finalize().await?))
}

async fn log_csv(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let text = render_log(&state.session(&id)?.log());
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], text).into_response())
}
