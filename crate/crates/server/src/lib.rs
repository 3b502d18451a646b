//! HTTP/JSON facade over the workbench engine.
//!
//! Identity is the caller-supplied `X-User` header. It is trusted as given,
//! which suits a study deployment and nothing more.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use hintforge_core::content_pool::{ContentPool, PoolError, PoolSummary, StepRef};
use hintforge_core::digest::content_digest;
use hintforge_core::llm_gateway::GatewayError;
use hintforge_core::log_engine::{ExportFilter, ExportOptions, LogError, NodeKind};
use hintforge_core::prompt_library::{Level, LibraryError, NewPrompt, QueryOrder};
use hintforge_core::sampler::{SampleError, Scope};
use hintforge_core::scratchpad::{diff, ScratchpadError};
use hintforge_core::workbench::{ExecuteRequest, JobRequest, JobState, ValidateRequest, Workbench, WorkbenchError};

pub mod config;
pub mod idempotency;

pub use config::{ConfigError, ServerConfig};

pub const USER_HEADER: &str = "x-user";
pub const MAX_BODY: usize = 64 * 1024 * 1024;

pub struct AppState {
    pub workbench: Arc<Workbench>,
    pub idempotency: idempotency::IdempotencyCache,
}

impl AppState {
    pub fn new(workbench: Workbench) -> Arc<Self> {
        Arc::new(AppState {
            workbench: Arc::new(workbench),
            idempotency: Default::default(),
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServerError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("port {0} is already in use")]
    PortInUse(u16),
    #[error("cannot open state: {0}")]
    State(#[from] WorkbenchError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: ErrorDetail,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorDetail {
    pub code: String,
    pub message: String,
}

pub(crate) fn error_body(status: StatusCode, code: &str, message: &str) -> Response {
    let body = ErrorBody {
        error: ErrorDetail { code: code.into(), message: message.into() },
    };
    (status, Json(body)).into_response()
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into() }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "INVALID_REQUEST", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        error_body(self.status, self.code, &self.message)
    }
}

pub fn status_for(e: &WorkbenchError) -> StatusCode {
    use WorkbenchError as W;
    match e {
        W::NotFound { .. } => StatusCode::NOT_FOUND,
        W::Invalid(_) => StatusCode::BAD_REQUEST,
        W::Pool(PoolError::Source { .. }) => StatusCode::BAD_GATEWAY,
        W::Pool(PoolError::NotFound(_)) => StatusCode::NOT_FOUND,
        W::Pool(_) => StatusCode::UNPROCESSABLE_ENTITY,
        W::Library(LibraryError::UnknownPrompt(_) | LibraryError::UnknownParent(_)) => StatusCode::NOT_FOUND,
        W::Library(LibraryError::Journal(_) | LibraryError::Replay(_)) => StatusCode::INTERNAL_SERVER_ERROR,
        W::Library(_) => StatusCode::UNPROCESSABLE_ENTITY,
        W::Scratchpad(ScratchpadError::UnknownVariant(_)) => StatusCode::NOT_FOUND,
        W::Scratchpad(ScratchpadError::GatewayUnavailable(_) | ScratchpadError::Gateway(_)) => StatusCode::BAD_GATEWAY,
        W::Scratchpad(ScratchpadError::Log(_)) => StatusCode::INTERNAL_SERVER_ERROR,
        W::Scratchpad(_) => StatusCode::UNPROCESSABLE_ENTITY,
        W::Sample(SampleError::UnknownLesson(_)) => StatusCode::NOT_FOUND,
        W::Sample(_) => StatusCode::UNPROCESSABLE_ENTITY,
        W::Gateway(GatewayError::UnknownProvider(_) | GatewayError::InvalidRequest(_)) => StatusCode::UNPROCESSABLE_ENTITY,
        W::Gateway(_) => StatusCode::BAD_GATEWAY,
        W::Log(LogError::UnknownRoot(_)) => StatusCode::NOT_FOUND,
        W::Log(_) | W::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl From<WorkbenchError> for ApiError {
    fn from(e: WorkbenchError) -> Self {
        ApiError::new(status_for(&e), e.code(), e.to_string())
    }
}

type ApiResult<T> = Result<T, ApiError>;

async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T, WorkbenchError> + Send + 'static,
{
    match tokio::task::spawn_blocking(f).await {
        Ok(r) => r.map_err(ApiError::from),
        Err(e) => Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", e.to_string())),
    }
}

fn user(headers: &HeaderMap) -> ApiResult<String> {
    headers
        .get(USER_HEADER)
        .and_then(|v| v.to_str().ok())
        .map(str::trim)
        .filter(|u| !u.is_empty())
        .map(String::from)
        .ok_or_else(|| ApiError::new(StatusCode::UNAUTHORIZED, "MISSING_USER", "the X-User header is required"))
}

fn json_body<T: serde::de::DeserializeOwned>(bytes: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(bytes).map_err(|e| ApiError::bad_request(format!("bad JSON body: {e}")))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/pools", post(create_pool).get(list_pools))
        .route("/pools/{id}", get(get_pool))
        .route("/pools/{id}/sample", get(sample))
        .route("/prompts", post(commit_prompt).get(list_prompts))
        .route("/prompts/{id}", get(get_prompt))
        .route("/prompts/{id}/clone", post(clone_prompt))
        .route("/prompts/{id}/upvote", post(upvote))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/variants", post(create_variant))
        .route("/sessions/{id}/variants/{label}", delete(delete_variant))
        .route("/sessions/{id}/diff", get(variant_diff))
        .route("/executions", post(execute))
        .route("/jobs/generate", post(start_job))
        .route("/jobs/{id}", get(get_job))
        .route("/jobs/{id}/artifact", get(job_artifact))
        .route("/logs/export", get(export_log))
        .route("/logs/chain", get(log_chain))
        .route("/analytics/influence", get(influence))
        .route("/analytics/users", get(users))
        .route("/validate", post(validate))
        .layer(axum::middleware::from_fn_with_state(Arc::clone(&state), idempotency::middleware))
        .layer(DefaultBodyLimit::max(MAX_BODY))
        .with_state(state)
}

/// Binds the listener, mapping an occupied port to [`ServerError::PortInUse`].
pub async fn bind(config: &ServerConfig) -> Result<tokio::net::TcpListener, ServerError> {
    let addr = format!("{}:{}", config.host, config.port);
    match tokio::net::TcpListener::bind(&addr).await {
        Ok(l) => Ok(l),
        Err(e) if e.kind() == std::io::ErrorKind::AddrInUse => Err(ServerError::PortInUse(config.port)),
        Err(e) => Err(e.into()),
    }
}

/// Opens state, binds, and serves until `shutdown` resolves.
pub async fn serve(
    config: ServerConfig,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> Result<(), ServerError> {
    let listener = bind(&config).await?;
    let wb_config = config.workbench();
    let workbench = tokio::task::spawn_blocking(move || Workbench::open(wb_config))
        .await
        .map_err(|e| std::io::Error::other(e.to_string()))??;
    let app = router(AppState::new(workbench));
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await?;
    Ok(())
}

pub fn local_addr(listener: &tokio::net::TcpListener) -> std::io::Result<SocketAddr> {
    listener.local_addr()
}

// ---- handlers ----

#[derive(Debug, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub name: String,
    pub version: String,
    pub providers: Vec<String>,
}

async fn health(State(st): State<Arc<AppState>>) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        name: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        providers: st.workbench.gateway().provider_names(),
    })
}

#[derive(Debug, Deserialize)]
struct PoolQuery {
    pool_id: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoolFromUrl {
    url: String,
    pool_id: Option<String>,
}

fn derived_pool_id(bytes: &[u8]) -> String {
    let d = content_digest(bytes);
    format!("pool-{}", &d["sha256:".len().."sha256:".len() + 12])
}

async fn create_pool(
    State(st): State<Arc<AppState>>,
    Query(q): Query<PoolQuery>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<PoolSummary>)> {
    let is_json = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|ct| ct.starts_with("application/json"));
    let wb = Arc::clone(&st.workbench);
    let summary = if is_json {
        let req: PoolFromUrl = json_body(&body)?;
        if !(req.url.starts_with("http://") || req.url.starts_with("https://")) {
            return Err(ApiError::bad_request("url must be http(s)"));
        }
        let id = req.pool_id.or(q.pool_id).unwrap_or_else(|| derived_pool_id(req.url.as_bytes()));
        blocking(move || wb.ingest_uri(&id, &req.url)).await?
    } else {
        let id = q.pool_id.unwrap_or_else(|| derived_pool_id(&body));
        blocking(move || wb.ingest_csv(&id, &body)).await?
    };
    Ok((StatusCode::CREATED, Json(summary)))
}

async fn list_pools(State(st): State<Arc<AppState>>) -> ApiResult<Json<Vec<PoolSummary>>> {
    let wb = &st.workbench;
    let mut out = Vec::new();
    for id in wb.pool_ids() {
        out.push(wb.pool(&id)?.summary());
    }
    Ok(Json(out))
}

#[derive(Debug, Serialize)]
struct PoolView<'a> {
    summary: PoolSummary,
    pool: &'a ContentPool,
}

async fn get_pool(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let pool = st.workbench.pool(&id)?;
    Ok(Json(PoolView { summary: pool.summary(), pool: &pool }).into_response())
}

#[derive(Debug, Deserialize)]
struct SampleQuery {
    scope: Option<Scope>,
    lesson: Option<String>,
    n: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SampleResponse {
    pub pool_id: String,
    pub scope: Scope,
    pub lesson_id: Option<String>,
    pub seed: u64,
    pub step_refs: Vec<StepRef>,
}

async fn sample(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<SampleQuery>,
) -> ApiResult<Json<SampleResponse>> {
    let scope = q.scope.unwrap_or(if q.lesson.is_some() { Scope::Lesson } else { Scope::Textbook });
    let seed = q.seed.unwrap_or(0);
    let n = q.n.unwrap_or(3);
    let step_refs = st.workbench.sample(&id, scope, q.lesson.as_deref(), n, seed)?;
    Ok(Json(SampleResponse { pool_id: id, scope, lesson_id: q.lesson, seed, step_refs }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CommitBody {
    level: Level,
    #[serde(default)]
    lesson_id: Option<String>,
    body: String,
    #[serde(default)]
    parent_id: Option<String>,
    #[serde(default)]
    session_id: Option<String>,
    #[serde(default)]
    variant_label: Option<String>,
}

async fn commit_prompt(State(st): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> ApiResult<Response> {
    let author = user(&headers)?;
    let req: CommitBody = json_body(&body)?;
    let from = match (req.session_id, req.variant_label) {
        (Some(s), Some(v)) => Some((s, v)),
        (None, None) => None,
        _ => return Err(ApiError::bad_request("session_id and variant_label go together")),
    };
    let new = NewPrompt {
        author,
        level: req.level,
        lesson_id: req.lesson_id,
        body: req.body,
        parent_id: req.parent_id,
    };
    let wb = Arc::clone(&st.workbench);
    let prompt = blocking(move || wb.commit_prompt(new, from.as_ref().map(|(s, v)| (s.as_str(), v.as_str())))).await?;
    Ok((StatusCode::CREATED, Json(prompt)).into_response())
}

#[derive(Debug, Deserialize)]
struct PromptQuery {
    level: Option<Level>,
    lesson: Option<String>,
    order: Option<QueryOrder>,
}

async fn list_prompts(State(st): State<Arc<AppState>>, Query(q): Query<PromptQuery>) -> Response {
    let prompts = st.workbench.prompts(q.level, q.lesson.as_deref(), q.order.unwrap_or(QueryOrder::Sequence));
    Json(prompts).into_response()
}

async fn get_prompt(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(st.workbench.prompt(&id)?).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CloneBody {
    level: Level,
    #[serde(default)]
    lesson_id: Option<String>,
}

async fn clone_prompt(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Response> {
    let author = user(&headers)?;
    let req: CloneBody = json_body(&body)?;
    let wb = Arc::clone(&st.workbench);
    let prompt = blocking(move || wb.clone_prompt(&id, &author, req.level, req.lesson_id.as_deref())).await?;
    Ok((StatusCode::CREATED, Json(prompt)).into_response())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct UpvoteResponse {
    pub prompt_id: String,
    pub upvotes: u64,
}

async fn upvote(State(st): State<Arc<AppState>>, Path(id): Path<String>, headers: HeaderMap) -> ApiResult<Json<UpvoteResponse>> {
    let voter = user(&headers)?;
    let wb = Arc::clone(&st.workbench);
    let pid = id.clone();
    let upvotes = blocking(move || wb.upvote(&pid, &voter)).await?;
    Ok(Json(UpvoteResponse { prompt_id: id, upvotes }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SessionBody {
    pool_id: String,
    #[serde(default)]
    level: Option<Level>,
    #[serde(default)]
    lesson_id: Option<String>,
}

async fn create_session(State(st): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> ApiResult<Response> {
    let author = user(&headers)?;
    let req: SessionBody = json_body(&body)?;
    let wb = Arc::clone(&st.workbench);
    let s = blocking(move || wb.create_session(&author, &req.pool_id, req.level, req.lesson_id.as_deref())).await?;
    Ok((StatusCode::CREATED, Json(s)).into_response())
}

async fn get_session(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(st.workbench.session(&id)?).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct VariantBody {
    body: String,
    #[serde(default)]
    derived_from: Option<String>,
}

async fn create_variant(State(st): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let req: VariantBody = json_body(&body)?;
    let wb = Arc::clone(&st.workbench);
    let v = blocking(move || wb.create_variant(&id, &req.body, req.derived_from.as_deref())).await?;
    Ok((StatusCode::CREATED, Json(v)).into_response())
}

async fn delete_variant(State(st): State<Arc<AppState>>, Path((id, label)): Path<(String, String)>) -> ApiResult<Response> {
    let wb = Arc::clone(&st.workbench);
    let v = blocking(move || wb.delete_variant(&id, &label)).await?;
    Ok(Json(v).into_response())
}

#[derive(Debug, Deserialize)]
struct DiffQuery {
    from: String,
    to: String,
}

async fn variant_diff(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<DiffQuery>,
) -> ApiResult<Response> {
    let session = st.workbench.session(&id)?;
    let body = |label: &str| {
        session
            .variant(label)
            .map(|v| v.body.clone())
            .ok_or_else(|| ApiError::from(WorkbenchError::Scratchpad(ScratchpadError::UnknownVariant(label.into()))))
    };
    Ok(Json(diff(&body(&q.from)?, &body(&q.to)?)).into_response())
}

async fn execute(State(st): State<Arc<AppState>>, body: Bytes) -> ApiResult<Response> {
    let req: ExecuteRequest = json_body(&body)?;
    let wb = Arc::clone(&st.workbench);
    let record = blocking(move || wb.execute(&req)).await?;
    Ok(Json(record).into_response())
}

async fn start_job(State(st): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> ApiResult<Response> {
    let author = user(&headers)?;
    let mut req: JobRequest = json_body(&body)?;
    req.author = author;
    let wb = Arc::clone(&st.workbench);
    let status = blocking(move || wb.start_job(req)).await?;
    Ok((StatusCode::ACCEPTED, Json(status)).into_response())
}

async fn get_job(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let wb = Arc::clone(&st.workbench);
    Ok(Json(blocking(move || wb.job(&id)).await?).into_response())
}

async fn job_artifact(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let wb = Arc::clone(&st.workbench);
    let job = blocking(move || wb.job(&id)).await?;
    match job.result.and_then(|r| r.artifact) {
        Some(doc) => Ok(([(header::CONTENT_TYPE, "application/json")], doc.to_bytes()).into_response()),
        None if matches!(job.state, JobState::Queued | JobState::Running) => {
            Err(ApiError::new(StatusCode::CONFLICT, "JOB_NOT_FINISHED", format!("job {} is still running", job.job_id)))
        }
        None => Err(ApiError::new(
            StatusCode::CONFLICT,
            "NO_ARTIFACT",
            job.error.unwrap_or_else(|| "job produced no artifact".into()),
        )),
    }
}

#[derive(Debug, Deserialize)]
struct ExportQuery {
    author: Option<String>,
    kind: Option<NodeKind>,
    from: Option<DateTime<Utc>>,
    to: Option<DateTime<Utc>>,
    #[serde(default)]
    inline_outputs: bool,
}

async fn export_log(State(st): State<Arc<AppState>>, Query(q): Query<ExportQuery>) -> ApiResult<Response> {
    let options = ExportOptions {
        filter: ExportFilter { author: q.author, kind: q.kind, from: q.from, to: q.to },
        inline_outputs: q.inline_outputs,
    };
    let wb = Arc::clone(&st.workbench);
    let bytes = blocking(move || Ok(wb.export_log(&options))).await?;
    Ok(([(header::CONTENT_TYPE, "application/json")], bytes).into_response())
}

#[derive(Debug, Deserialize)]
struct ChainQuery {
    author: String,
    level: Level,
    root: String,
}

async fn log_chain(State(st): State<Arc<AppState>>, Query(q): Query<ChainQuery>) -> ApiResult<Response> {
    Ok(Json(st.workbench.iteration_chain(&q.author, q.level, &q.root)?).into_response())
}

async fn influence(State(st): State<Arc<AppState>>) -> Response {
    Json(st.workbench.influence()).into_response()
}

async fn users(State(st): State<Arc<AppState>>) -> Json<BTreeMap<String, hintforge_core::log_engine::UserStats>> {
    Json(st.workbench.user_stats())
}

async fn validate(State(st): State<Arc<AppState>>, body: Bytes) -> ApiResult<Response> {
    let req: ValidateRequest = json_body(&body)?;
    let wb = Arc::clone(&st.workbench);
    Ok(Json(blocking(move || wb.validate_text(&req)).await?).into_response())
}
