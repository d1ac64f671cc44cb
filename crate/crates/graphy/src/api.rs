//! REST API under `/api/v1`.
//!
//! Every session request runs under that session's lock on the blocking
//! pool, so actions on one session are serialized while different sessions
//! proceed in parallel. The graph is a read-only snapshot.

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use graphy_core::exploration::{
    Action, ActionOutcome, BucketKey, ExplorationError, Filter, Population, RefineSpec, Session,
    DEFAULT_SEARCH_LIMIT,
};
use graphy_core::generation::{GenerationError, IntentEdit, JobStage, MindMap, ReportFormat, ReportJob};
use graphy_core::graph::{Direction, EdgeKind, Graph, Node, NodeId, NodeRole};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::app::App;
use crate::sessions::{Entry, SessionError, SessionStore};

pub struct AppState {
    pub app: App,
    pub graph: Arc<Graph>,
    pub sessions: SessionStore,
}

pub type SharedState = Arc<AppState>;

/// An error body `{code, message}` with a stable code string.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    fn internal(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            tracing::error!(code = self.code, "{}", self.message);
        }
        (self.status, Json(json!({"code": self.code, "message": self.message}))).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "invalid_body", e.body_text())
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::NotFound(_) => ApiError::new(StatusCode::NOT_FOUND, "session_not_found", e.to_string()),
            other => ApiError::internal(other.to_string()),
        }
    }
}

impl From<ExplorationError> for ApiError {
    fn from(e: ExplorationError) -> Self {
        use ExplorationError as E;
        let (status, code) = match &e {
            E::UnknownLabel(_) => (StatusCode::BAD_REQUEST, "unknown_label"),
            E::UnknownAttribute { .. } => (StatusCode::BAD_REQUEST, "unknown_attribute"),
            E::StaleBucket(_) => (StatusCode::CONFLICT, "stale_bucket"),
            E::EmptySelection => (StatusCode::BAD_REQUEST, "empty_selection"),
            E::NotInPresent(_) => (StatusCode::CONFLICT, "not_in_present"),
            E::NotInFuture(_) => (StatusCode::CONFLICT, "not_in_future"),
            E::NoView => (StatusCode::CONFLICT, "no_view"),
            E::InvalidIR(_) => (StatusCode::BAD_REQUEST, "invalid_query"),
            E::UnknownNode(_) => (StatusCode::NOT_FOUND, "unknown_node"),
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl From<GenerationError> for ApiError {
    fn from(e: GenerationError) -> Self {
        use GenerationError as G;
        let (status, code) = match &e {
            G::EmptyInstruction => (StatusCode::BAD_REQUEST, "empty_instruction"),
            G::NoUsableIntent => (StatusCode::UNPROCESSABLE_ENTITY, "no_usable_intent"),
            G::UnknownAttribute(_) => (StatusCode::BAD_REQUEST, "unknown_attribute"),
            G::NoAttributes => (StatusCode::BAD_REQUEST, "no_attributes"),
            G::UnknownDimension(_) => (StatusCode::BAD_REQUEST, "unknown_dimension"),
            G::EmptySelection => (StatusCode::BAD_REQUEST, "empty_selection"),
            G::UnknownFact(_) => (StatusCode::NOT_FOUND, "unknown_node"),
            G::InvalidBatchSize => (StatusCode::BAD_REQUEST, "invalid_batch_size"),
            G::EmptyMindMap => (StatusCode::BAD_REQUEST, "empty_mindmap"),
            G::InvalidMindMap(_) => (StatusCode::BAD_REQUEST, "invalid_mindmap"),
            G::ProviderFailure(_) => (StatusCode::BAD_GATEWAY, "provider_failure"),
            G::UnsupportedFormat(_) => (StatusCode::BAD_REQUEST, "unsupported_format"),
            G::InvalidStage { .. } => (StatusCode::CONFLICT, "invalid_stage"),
        };
        ApiError::new(status, code, e.to_string())
    }
}

type ApiResult<T> = Result<T, ApiError>;
type Body<T> = Result<Json<T>, JsonRejection>;

pub fn router(state: SharedState) -> Router {
    let api = Router::new()
        .route("/health", get(health))
        .route("/graph/schema", get(graph_schema))
        .route("/graph/nodes/{id}", get(graph_node))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/search", post(search))
        .route("/sessions/{id}/histogram", post(histogram))
        .route("/sessions/{id}/bucket-filter", post(bucket_filter))
        .route("/sessions/{id}/prequery", post(prequery))
        .route("/sessions/{id}/refine", post(refine))
        .route("/sessions/{id}/promote", post(promote))
        .route("/sessions/{id}/report", get(get_report))
        .route("/sessions/{id}/report/intent", post(report_intent))
        .route("/sessions/{id}/report/intent/confirm", post(confirm_intent))
        .route("/sessions/{id}/report/mindmap", post(report_mindmap))
        .route("/sessions/{id}/report/mindmap/confirm", post(confirm_mindmap))
        .route("/sessions/{id}/report/draft", post(report_draft))
        .route("/sessions/{id}/report/download", get(download));
    Router::new()
        .nest("/api/v1", api)
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint") })
        .with_state(state)
}

/// Runs `f` on the blocking pool while holding the session's lock, and
/// persists the session afterwards when `mutates` is set and `f` succeeded.
async fn with_session<T, F>(state: SharedState, id: String, mutates: bool, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&AppState, &mut Entry) -> ApiResult<T> + Send + 'static,
{
    let handle = state.sessions.get(&id)?;
    let mut entry = handle.lock_owned().await;
    tokio::task::spawn_blocking(move || {
        entry.touch();
        let out = f(&state, &mut entry)?;
        if mutates {
            state.sessions.persist(&entry)?;
        }
        Ok(out)
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))?
}

#[derive(Serialize)]
struct SessionView<'a> {
    #[serde(flatten)]
    session: &'a Session,
    report_stage: Option<JobStage>,
}

fn session_view(entry: &Entry) -> Value {
    serde_json::to_value(SessionView {
        session: &entry.session,
        report_stage: entry.job.as_ref().map(|j| j.stage),
    })
    .expect("session serializes")
}

#[derive(Serialize)]
struct ActionResponse {
    outcome: ActionOutcome,
    session: Value,
}

async fn run_action(state: SharedState, id: String, action: Action) -> ApiResult<Json<ActionResponse>> {
    with_session(state, id, true, move |st, entry| {
        let outcome = entry.session.apply(&st.graph, action, st.app.exec)?;
        Ok(Json(ActionResponse {
            outcome,
            session: session_view(entry),
        }))
    })
    .await
}

async fn health() -> Json<Value> {
    Json(json!({"status": "ok"}))
}

async fn graph_schema(State(state): State<SharedState>) -> Json<Value> {
    Json(serde_json::to_value(state.graph.schema()).expect("schema serializes"))
}

fn parse_node_id(raw: &str) -> ApiResult<NodeId> {
    raw.parse()
        .map_err(|_| ApiError::new(StatusCode::BAD_REQUEST, "invalid_id", format!("{raw:?} is not a node id")))
}

fn node_json(node: &Node) -> Value {
    let (role, value) = match node {
        Node::Fact(f) => ("fact", serde_json::to_value(f)),
        Node::Dimension(d) => ("dimension", serde_json::to_value(d)),
    };
    let mut value = value.expect("node serializes");
    value["role"] = json!(role);
    value
}

async fn graph_node(State(state): State<SharedState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let id = parse_node_id(&id)?;
    let g = &state.graph;
    let node = g
        .node(id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_node", format!("unknown node {id}")))?;
    let mut body = json!({"node": node_json(node)});
    if node.role() == NodeRole::Fact {
        let dimensions: Vec<Value> = g
            .schema()
            .labels_with_role(NodeRole::Dimension)
            .flat_map(|label| g.dimensions_of(id, label))
            .map(|d| serde_json::to_value(d).expect("dimension serializes"))
            .collect();
        let neighbors = |dir| g.neighbors(id, EdgeKind::NavigatesTo, dir).unwrap_or_default();
        body["dimensions"] = json!(dimensions);
        body["cites"] = json!(neighbors(Direction::Out));
        body["cited_by"] = json!(neighbors(Direction::In));
    }
    Ok(Json(body))
}

async fn create_session(State(state): State<SharedState>) -> ApiResult<(StatusCode, Json<Value>)> {
    let handle = state.sessions.create()?;
    let entry = handle.lock().await;
    Ok((StatusCode::CREATED, Json(session_view(&entry))))
}

async fn get_session(State(state): State<SharedState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    with_session(state, id, false, |_, entry| Ok(Json(session_view(entry)))).await
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Filters {
    One(Filter),
    Many(Vec<Filter>),
}

impl Default for Filters {
    fn default() -> Self {
        Filters::Many(Vec::new())
    }
}

impl From<Filters> for Vec<Filter> {
    fn from(f: Filters) -> Self {
        match f {
            Filters::One(f) => vec![f],
            Filters::Many(fs) => fs,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SearchBody {
    label: String,
    #[serde(default, alias = "predicate")]
    filters: Filters,
    #[serde(default)]
    limit: Option<usize>,
}

async fn search(State(state): State<SharedState>, Path(id): Path<String>, body: Body<SearchBody>) -> ApiResult<Json<ActionResponse>> {
    let Json(body) = body?;
    let action = Action::Search {
        label: body.label,
        filters: body.filters.into(),
        limit: body.limit.unwrap_or(DEFAULT_SEARCH_LIMIT),
    };
    run_action(state, id, action).await
}

/// Either an explicit population or a label (with optional filters).
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HistogramBody {
    #[serde(default)]
    population: Option<Population>,
    #[serde(default)]
    label: Option<String>,
    #[serde(default, alias = "predicate")]
    filters: Filters,
    attribute: String,
}

async fn histogram(State(state): State<SharedState>, Path(id): Path<String>, body: Body<HistogramBody>) -> ApiResult<Json<ActionResponse>> {
    let Json(body) = body?;
    let population = match (body.population, body.label) {
        (Some(p), None) => p,
        (None, Some(label)) => Population::Query {
            label,
            filters: body.filters.into(),
        },
        _ => {
            return Err(ApiError::new(
                StatusCode::BAD_REQUEST,
                "invalid_body",
                "exactly one of \"population\" and \"label\" is required",
            ))
        }
    };
    run_action(state, id, Action::Histogram { population, attribute: body.attribute }).await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BucketBody {
    attribute: String,
    bucket: BucketKey,
}

async fn bucket_filter(State(state): State<SharedState>, Path(id): Path<String>, body: Body<BucketBody>) -> ApiResult<Json<ActionResponse>> {
    let Json(body) = body?;
    run_action(state, id, Action::BucketFilter { attribute: body.attribute, bucket: body.bucket }).await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PrequeryBody {
    selected: Vec<NodeId>,
}

async fn prequery(State(state): State<SharedState>, Path(id): Path<String>, body: Body<PrequeryBody>) -> ApiResult<Json<ActionResponse>> {
    let Json(body) = body?;
    run_action(state, id, Action::Prequery { selected: body.selected }).await
}

/// Accepts `{"mode": ..., "params": {...}}` as well as the flat form with
/// the parameters next to `mode`.
fn refine_spec(mut body: Value) -> ApiResult<RefineSpec> {
    if let Some(obj) = body.as_object_mut() {
        if let Some(Value::Object(params)) = obj.remove("params") {
            obj.extend(params);
        }
    }
    serde_json::from_value(body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_body", e.to_string()))
}

async fn refine(State(state): State<SharedState>, Path(id): Path<String>, body: Body<Value>) -> ApiResult<Json<ActionResponse>> {
    let Json(body) = body?;
    let spec = refine_spec(body)?;
    run_action(state, id, Action::Refine { spec }).await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PromoteBody {
    chosen: Vec<NodeId>,
}

async fn promote(State(state): State<SharedState>, Path(id): Path<String>, body: Body<PromoteBody>) -> ApiResult<Json<ActionResponse>> {
    let Json(body) = body?;
    run_action(state, id, Action::Promote { chosen: body.chosen }).await
}

fn job_mut(entry: &mut Entry) -> ApiResult<&mut ReportJob> {
    entry
        .job
        .as_mut()
        .ok_or_else(|| ApiError::new(StatusCode::CONFLICT, "no_report", "no report has been started in this session"))
}

fn job_json(job: &ReportJob) -> Json<Value> {
    Json(serde_json::to_value(job).expect("job serializes"))
}

async fn get_report(State(state): State<SharedState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    with_session(state, id, false, |_, entry| Ok(job_json(job_mut(entry)?))).await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct IntentBody {
    instruction: String,
}

/// Starts a report over the present canvas, replacing any earlier job.
async fn report_intent(State(state): State<SharedState>, Path(id): Path<String>, body: Body<IntentBody>) -> ApiResult<Json<Value>> {
    let Json(body) = body?;
    with_session(state, id, true, move |st, entry| {
        let selected: Vec<NodeId> = entry.session.present.iter().copied().collect();
        let job = ReportJob::start(&st.graph, selected, &body.instruction, st.app.model.as_ref())?;
        let out = job_json(&job);
        entry.job = Some(job);
        Ok(out)
    })
    .await
}

async fn confirm_intent(State(state): State<SharedState>, Path(id): Path<String>, body: Option<Json<IntentEdit>>) -> ApiResult<Json<Value>> {
    let edit = body.map(|Json(e)| e).unwrap_or_default();
    with_session(state, id, true, move |st, entry| {
        let job = job_mut(entry)?;
        job.confirm_intent(&st.graph, &edit)?;
        Ok(job_json(job))
    })
    .await
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct MindmapBody {
    #[serde(default)]
    batch_size: Option<usize>,
}

async fn report_mindmap(State(state): State<SharedState>, Path(id): Path<String>, body: Option<Json<MindmapBody>>) -> ApiResult<Json<Value>> {
    let body = body.map(|Json(b)| b).unwrap_or_default();
    with_session(state, id, true, move |st, entry| {
        let job = job_mut(entry)?;
        job.propose_mindmap(st.app.model.as_ref(), body.batch_size)?;
        Ok(job_json(job))
    })
    .await
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ConfirmMindmapBody {
    #[serde(default)]
    mindmap: Option<MindMap>,
}

async fn confirm_mindmap(State(state): State<SharedState>, Path(id): Path<String>, body: Option<Json<ConfirmMindmapBody>>) -> ApiResult<Json<Value>> {
    let body = body.map(|Json(b)| b).unwrap_or_default();
    with_session(state, id, true, move |_, entry| {
        let job = job_mut(entry)?;
        job.confirm_mindmap(body.mindmap)?;
        Ok(job_json(job))
    })
    .await
}

async fn report_draft(State(state): State<SharedState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    with_session(state, id, true, move |st, entry| {
        let job = job_mut(entry)?;
        job.write_draft(st.app.model.as_ref())?;
        Ok(job_json(job))
    })
    .await
}

#[derive(Deserialize)]
struct DownloadQuery {
    #[serde(default)]
    format: Option<String>,
}

async fn download(State(state): State<SharedState>, Path(id): Path<String>, Query(q): Query<DownloadQuery>) -> ApiResult<Response> {
    let format: ReportFormat = q.format.as_deref().unwrap_or("markdown").parse()?;
    with_session(state, id, false, move |_, entry| {
        let text = job_mut(entry)?.render(format)?;
        let disposition = format!("attachment; filename=\"report.{}\"", format.extension());
        Ok((
            [(header::CONTENT_TYPE, format.mime().to_string()), (header::CONTENT_DISPOSITION, disposition)],
            text,
        )
            .into_response())
    })
    .await
}
