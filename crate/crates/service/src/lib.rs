//! HTTP service for interactive layout editing.
//!
//! Sessions live in memory, optionally backed by a JSONL write-ahead log.
//! Mutations of one session are serialized by a per-session lock; different
//! sessions proceed in parallel, sharing the gateway's global in-flight bound.

pub mod store;

use std::path::PathBuf;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use layoutforge_core::eval::{render_svg, validate_against, SvgOptions, ValidationReport, ValidationThresholds};
use layoutforge_core::gateway::{Gateway, GenerationParams};
use layoutforge_core::prompt::{build_edit_prompt, build_generation_prompt, parse_completion, parse_completion_for_task, PromptError};
use layoutforge_core::scene::Layout;
use layoutforge_core::session::{
    CreateSession, EditRequest, EntryKind, ErrorBody, HistoryEntry, LayoutResult, Session, SessionCreated, ValidateRequest,
};
use tower_http::cors::CorsLayer;

pub use store::{Store, StoreError};

pub struct ServiceConfig {
    pub gateway: Gateway,
    pub params: GenerationParams,
    pub thresholds: ValidationThresholds,
    pub persist: Option<PathBuf>,
    /// Browser origin allowed to call the API.
    pub cors_origin: Option<String>,
}

impl ServiceConfig {
    pub fn new(gateway: Gateway) -> Self {
        Self {
            gateway,
            params: GenerationParams::default(),
            thresholds: ValidationThresholds::default(),
            persist: None,
            cors_origin: None,
        }
    }
}

pub struct AppState {
    pub store: Store,
    gateway: Gateway,
    params: GenerationParams,
    thresholds: ValidationThresholds,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }

    fn not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "unknown_session", format!("no session `{id}`"))
    }

    fn not_generated(id: &str) -> Self {
        Self::new(StatusCode::CONFLICT, "not_generated", format!("session `{id}` has no layout yet; call generate first"))
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_body", r.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            code: self.code.to_string(),
            message: self.message,
        };
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

impl AppState {
    pub fn new(config: &ServiceConfig) -> Result<Arc<Self>, StoreError> {
        let store = match &config.persist {
            Some(path) => Store::open(path)?,
            None => Store::in_memory(),
        };
        Ok(Arc::new(Self {
            store,
            gateway: config.gateway.clone(),
            params: config.params.clone(),
            thresholds: config.thresholds,
        }))
    }

    async fn session(&self, id: &str) -> ApiResult<store::SessionHandle> {
        self.store.get(id).await.ok_or_else(|| ApiError::not_found(id))
    }

    async fn complete(&self, bundle: &layoutforge_core::prompt::PromptBundle) -> ApiResult<String> {
        self.gateway
            .complete(bundle, &self.params)
            .await
            .map_err(|e| ApiError::new(StatusCode::BAD_GATEWAY, "gateway_error", e.to_string()))
    }
}

pub fn router(state: Arc<AppState>, cors_origin: Option<&str>) -> Result<Router, ServeError> {
    let mut app = Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/generate", post(generate))
        .route("/sessions/{id}/edit", post(edit))
        .route("/sessions/{id}/layout", get(get_layout))
        .route("/sessions/{id}/render.svg", get(get_svg))
        .route("/sessions/{id}/history", get(get_history))
        .route("/validate", post(validate_layout))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route") })
        .with_state(state);
    if let Some(origin) = cors_origin {
        let origin: HeaderValue = origin.parse().map_err(|_| ServeError::Cors(origin.to_string()))?;
        app = app.layer(
            CorsLayer::new()
                .allow_origin(origin)
                .allow_methods([Method::GET, Method::POST])
                .allow_headers([header::CONTENT_TYPE]),
        );
    }
    Ok(app)
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("invalid CORS origin `{0}`")]
    Cors(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Serves until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, config: ServiceConfig) -> Result<(), ServeError> {
    let state = AppState::new(&config)?;
    let app = router(state, config.cors_origin.as_deref())?;
    tracing::info!(addr = ?listener.local_addr().ok(), "serving");
    axum::serve(listener, app).await?;
    Ok(())
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

async fn create_session(State(st): State<Arc<AppState>>, body: Result<Json<CreateSession>, JsonRejection>) -> ApiResult<(StatusCode, Json<SessionCreated>)> {
    let Json(req) = body?;
    // Reject tasks that could never be prompted before anything is stored.
    build_generation_prompt(&req.task).map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_task", e.to_string()))?;
    let session_id = uuid::Uuid::new_v4().simple().to_string();
    st.store.create(session_id.clone(), req.task).await.map_err(ApiError::internal)?;
    Ok((StatusCode::CREATED, Json(SessionCreated { session_id })))
}

async fn get_session(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<Session>> {
    let handle = st.session(&id).await?;
    let s = handle.lock().await;
    Ok(Json(s.clone()))
}

async fn generate(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<LayoutResult>> {
    let handle = st.session(&id).await?;
    let mut s = handle.lock().await;
    if !s.history.is_empty() {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "already_generated",
            format!("session `{id}` already has a layout; use edit to revise it"),
        ));
    }
    let bundle = build_generation_prompt(&s.task).map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_task", e.to_string()))?;
    let text = st.complete(&bundle).await?;
    let parsed = parse_completion_for_task(&text, &s.task).map_err(unparseable)?;
    let report = validate_against(&parsed.layout, Some(&s.task), &st.thresholds);
    commit(&st, &mut s, EntryKind::Generate, String::new(), parsed.layout, report, parsed.reasoning).await
}

async fn edit(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<EditRequest>, JsonRejection>,
) -> ApiResult<Json<LayoutResult>> {
    let handle = st.session(&id).await?;
    let Json(req) = body?;
    let mut s = handle.lock().await;
    let current = s.current_layout().ok_or_else(|| ApiError::not_generated(&id))?;
    let bundle = build_edit_prompt(current, &req.instruction).map_err(|e| match e {
        PromptError::UnsupportedEdit(_) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "unsupported_edit", e.to_string()),
        other => ApiError::internal(other),
    })?;
    let text = st.complete(&bundle).await?;
    let parsed = parse_completion(&text).map_err(unparseable)?;
    let report = validate_against(&parsed.layout, None, &st.thresholds);
    commit(&st, &mut s, EntryKind::Edit, req.instruction, parsed.layout, report, parsed.reasoning).await
}

fn unparseable(e: layoutforge_core::prompt::ParseError) -> ApiError {
    ApiError::new(StatusCode::BAD_GATEWAY, "unparseable_completion", e.to_string())
}

async fn commit(
    st: &AppState,
    s: &mut Session,
    kind: EntryKind,
    instruction: String,
    layout: Layout,
    report: ValidationReport,
    reasoning: String,
) -> ApiResult<Json<LayoutResult>> {
    let entry = HistoryEntry {
        kind,
        instruction,
        layout: layout.clone(),
        report: report.clone(),
        timestamp_ms: now_ms(),
    };
    st.store.append(s, entry).await.map_err(ApiError::internal)?;
    Ok(Json(LayoutResult {
        layout,
        report,
        reasoning,
        history_len: s.history.len(),
    }))
}

async fn get_layout(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<Layout>> {
    let handle = st.session(&id).await?;
    let s = handle.lock().await;
    s.current_layout().cloned().map(Json).ok_or_else(|| ApiError::not_generated(&id))
}

async fn get_svg(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let handle = st.session(&id).await?;
    let s = handle.lock().await;
    let layout = s.current_layout().ok_or_else(|| ApiError::not_generated(&id))?;
    let svg = render_svg(layout, &SvgOptions::default());
    Ok(([(header::CONTENT_TYPE, "image/svg+xml")], svg).into_response())
}

async fn get_history(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<Vec<HistoryEntry>>> {
    let handle = st.session(&id).await?;
    let s = handle.lock().await;
    Ok(Json(s.history.clone()))
}

async fn validate_layout(State(st): State<Arc<AppState>>, body: Result<Json<ValidateRequest>, JsonRejection>) -> ApiResult<Json<ValidationReport>> {
    let Json(req) = body?;
    Ok(Json(validate_against(&req.layout, req.task.as_ref(), &st.thresholds)))
}
