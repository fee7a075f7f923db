//! JSON REST surface over the registries.
//!
//! PIDs appear in paths in their raw `prefix/suffix` form, so every
//! PID-addressed route has two path segments for the identifier. Every
//! non-2xx response carries exactly one [`ApiError`] body.

use std::collections::BTreeMap;

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, RawQuery, State};
use axum::http::header::{CONTENT_TYPE, ETAG, IF_MATCH, LOCATION};
use axum::http::{HeaderMap, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use tokio::net::TcpListener;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};
use tower_http::services::ServeDir;

use crate::metadata::{self, MetadataClass, MetadataRecord, Properties, RecordStatus};
use crate::pid::Pid;
use crate::registry::{
    CreateFdo, FdoRecord, ListFilter, OperationDescriptor, Page, Registry, RegistryError, Resolved, UpdateFdo,
};
use crate::relations::{Direction, Edge, EdgeLabel};
use crate::store::StoreError;

pub const JSON_CONTENT_TYPE: &str = "application/json; charset=utf-8";
pub const DEFAULT_LISTEN: &str = "127.0.0.1:8490";

/// The body of every error response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub status: u16,
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub details: Option<Value>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status: status.as_u16(),
            code: code.to_owned(),
            message: message.into(),
            details: None,
        }
    }

    fn bad_request(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }
}

pub fn status_for(err: &RegistryError) -> StatusCode {
    match err {
        RegistryError::NotFound(_) => StatusCode::NOT_FOUND,
        RegistryError::Gone(_) => StatusCode::GONE,
        RegistryError::VersionConflict { .. } => StatusCode::PRECONDITION_FAILED,
        RegistryError::ValidationFailed(_)
        | RegistryError::InvalidDoRef(_)
        | RegistryError::InvalidChecksum(_)
        | RegistryError::ClassChangeForbidden { .. }
        | RegistryError::InvalidDescriptor(_)
        | RegistryError::NotACreativeWork(_) => StatusCode::UNPROCESSABLE_ENTITY,
        RegistryError::DuplicateOpId(_) => StatusCode::CONFLICT,
        RegistryError::InvalidPage(_) | RegistryError::InvalidDepth | RegistryError::Pid(_) => {
            StatusCode::BAD_REQUEST
        }
        RegistryError::Storage(StoreError::StorageFull(_)) => StatusCode::INSUFFICIENT_STORAGE,
        RegistryError::DuplicatePid | RegistryError::Storage(_) => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl From<RegistryError> for ApiError {
    fn from(err: RegistryError) -> Self {
        let status = status_for(&err);
        if status.is_server_error() {
            tracing::error!(error = %err, "request failed");
        }
        Self {
            status: status.as_u16(),
            code: err.code().to_owned(),
            message: err.to_string(),
            details: err.details(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        json_response(status, &self)
    }
}

type ApiResult = Result<Response, ApiError>;

fn json_response<T: Serialize>(status: StatusCode, body: &T) -> Response {
    let bytes = serde_json::to_vec(body).expect("response bodies serialize");
    (status, [(CONTENT_TYPE, HeaderValue::from_static(JSON_CONTENT_TYPE))], bytes).into_response()
}

fn with_etag(mut response: Response, version: u64) -> Response {
    if let Ok(v) = HeaderValue::from_str(&format!("\"{version}\"")) {
        response.headers_mut().insert(ETAG, v);
    }
    response
}

/// An FDO record with its metadata embedded, as returned by single-record routes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdoView {
    #[serde(flatten)]
    pub record: FdoRecord,
    pub metadata: MetadataRecord,
}

/// An edge plus the status of its source record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeView {
    #[serde(flatten)]
    pub edge: Edge,
    pub from_status: RecordStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateRequest {
    pub class: String,
    pub properties: Properties,
}

#[derive(Debug, Clone)]
pub enum CorsOrigin {
    Any,
    Exact(HeaderValue),
    Disabled,
}

#[derive(Debug, Clone)]
pub struct ApiConfig {
    pub cors: CorsOrigin,
    pub playground_dir: Option<PathBuf>,
}

impl Default for ApiConfig {
    fn default() -> Self {
        Self {
            cors: CorsOrigin::Any,
            playground_dir: None,
        }
    }
}

type AppState = Arc<Registry>;

pub fn router(registry: Arc<Registry>, config: &ApiConfig) -> Router {
    let mut app = Router::new()
        .route("/", get(service_info))
        .route("/fdos", get(list_fdos).post(create_fdo))
        .route(
            "/fdos/{prefix}/{suffix}",
            get(get_fdo).put(update_fdo).delete(delete_fdo),
        )
        .route("/fdos/{prefix}/{suffix}/metadata", get(get_fdo_metadata))
        .route("/fdos/{prefix}/{suffix}/operations", get(operations_for))
        .route("/operations", get(list_operations).post(register_operation))
        .route("/metadata/{prefix}/{suffix}", get(get_metadata))
        .route("/metadata/{prefix}/{suffix}/citations", get(citations))
        .route("/metadata/{prefix}/{suffix}/cited-by", get(cited_by))
        .route("/metadata/{prefix}/{suffix}/relations", get(relations))
        .route("/metadata/{prefix}/{suffix}/closure", get(closure))
        .route("/validate", axum::routing::post(validate))
        .route("/pids/{prefix}/{suffix}", get(resolve_pid))
        .route("/schema", get(all_schemas))
        .route("/schema/{class}", get(class_schema))
        .fallback(not_found)
        .method_not_allowed_fallback(method_not_allowed)
        .with_state(registry);

    if let Some(dir) = &config.playground_dir {
        app = app.nest_service("/playground", ServeDir::new(dir));
    }

    let allow_origin = match &config.cors {
        CorsOrigin::Any => Some(AllowOrigin::from(Any)),
        CorsOrigin::Exact(origin) => Some(AllowOrigin::exact(origin.clone())),
        CorsOrigin::Disabled => None,
    };
    if let Some(origin) = allow_origin {
        app = app.layer(
            CorsLayer::new()
                .allow_origin(origin)
                .allow_methods([Method::GET, Method::POST, Method::PUT, Method::DELETE])
                .allow_headers([CONTENT_TYPE, IF_MATCH])
                .expose_headers([ETAG, LOCATION]),
        );
    }
    app
}

/// Serves the API on an already bound listener until ctrl-c or SIGTERM.
pub async fn serve(registry: Arc<Registry>, listener: TcpListener, config: ApiConfig) -> std::io::Result<()> {
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(registry, &config))
        .with_graceful_shutdown(shutdown_signal())
        .await
}

async fn shutdown_signal() {
    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        let mut term = match signal(SignalKind::terminate()) {
            Ok(s) => s,
            Err(_) => {
                let _ = tokio::signal::ctrl_c().await;
                return;
            }
        };
        tokio::select! {
            _ = tokio::signal::ctrl_c() => {}
            _ = term.recv() => {}
        }
    }
    #[cfg(not(unix))]
    let _ = tokio::signal::ctrl_c().await;
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> T {
    tokio::task::spawn_blocking(f).await.expect("registry task panicked")
}

fn path_pid(prefix: &str, suffix: &str) -> Result<Pid, ApiError> {
    Pid::new(prefix, suffix).map_err(|e| ApiError::bad_request("MALFORMED_PID", e.to_string()))
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request("MALFORMED_BODY", e.to_string()))
}

fn query_map(raw: Option<String>) -> BTreeMap<String, String> {
    url::form_urlencoded::parse(raw.unwrap_or_default().as_bytes())
        .into_owned()
        .collect()
}

fn query_param<T: std::str::FromStr>(q: &BTreeMap<String, String>, key: &str) -> Result<Option<T>, ApiError> {
    q.get(key)
        .map(|v| {
            v.parse::<T>()
                .map_err(|_| ApiError::bad_request("INVALID_QUERY", format!("invalid value {v:?} for {key}")))
        })
        .transpose()
}

fn expected_version(headers: &HeaderMap) -> Result<u64, ApiError> {
    let raw = headers.get(IF_MATCH).ok_or_else(|| {
        ApiError::new(
            StatusCode::PRECONDITION_REQUIRED,
            "PRECONDITION_REQUIRED",
            "PUT requires an If-Match header carrying the current version",
        )
    })?;
    let invalid = || ApiError::bad_request("INVALID_PRECONDITION", "If-Match must look like \"<version>\"");
    let text = raw.to_str().map_err(|_| invalid())?.trim();
    let text = text.strip_prefix("W/").unwrap_or(text);
    let inner = text
        .strip_prefix('"')
        .and_then(|t| t.strip_suffix('"'))
        .unwrap_or(text);
    inner.parse().map_err(|_| invalid())
}

fn gone_or<T>(resolved: Resolved<T>) -> Result<T, ApiError> {
    match resolved {
        Resolved::Active(t) => Ok(t),
        Resolved::Tombstoned(t) => Err(RegistryError::Gone(t).into()),
    }
}

async fn service_info(State(reg): State<AppState>) -> Response {
    json_response(
        StatusCode::OK,
        &serde_json::json!({
            "service": "fdom",
            "version": env!("CARGO_PKG_VERSION"),
            "prefix": reg.prefix(),
            "journal_len": reg.journal_len(),
        }),
    )
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "NOT_FOUND", "no such endpoint")
}

async fn method_not_allowed() -> ApiError {
    ApiError::new(StatusCode::METHOD_NOT_ALLOWED, "METHOD_NOT_ALLOWED", "method not allowed")
}

async fn create_fdo(State(reg): State<AppState>, body: Bytes) -> ApiResult {
    let req: CreateFdo = parse_body(&body)?;
    let (record, metadata) = blocking(move || reg.create_fdo(req)).await?;
    let location = format!("/fdos/{}", record.pid);
    let version = record.version;
    let mut resp = json_response(StatusCode::CREATED, &FdoView { record, metadata });
    resp.headers_mut()
        .insert(LOCATION, HeaderValue::from_str(&location).expect("PIDs are header-safe"));
    Ok(with_etag(resp, version))
}

async fn list_fdos(State(reg): State<AppState>, RawQuery(raw): RawQuery) -> ApiResult {
    let q = query_map(raw);
    let class = match q.get("class") {
        Some(name) => Some(
            name.parse::<MetadataClass>()
                .map_err(|e| ApiError::bad_request("UNKNOWN_CLASS", e.to_string()))?,
        ),
        None => None,
    };
    let filter = ListFilter {
        class,
        include_tombstoned: query_param(&q, "include_tombstoned")?.unwrap_or(false),
    };
    let defaults = Page::default();
    let page = Page::new(
        query_param(&q, "offset")?.unwrap_or(defaults.offset),
        query_param(&q, "limit")?.unwrap_or(defaults.limit),
    );
    Ok(json_response(StatusCode::OK, &reg.list_fdos(filter, page)?))
}

async fn get_fdo(State(reg): State<AppState>, Path((prefix, suffix)): Path<(String, String)>) -> ApiResult {
    let pid = path_pid(&prefix, &suffix)?;
    let (record, metadata) = reg.get_fdo_with_metadata(&pid)?;
    let version = record.version;
    Ok(with_etag(json_response(StatusCode::OK, &FdoView { record, metadata }), version))
}

async fn update_fdo(
    State(reg): State<AppState>,
    Path((prefix, suffix)): Path<(String, String)>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult {
    let pid = path_pid(&prefix, &suffix)?;
    let expected = expected_version(&headers)?;
    let req: UpdateFdo = parse_body(&body)?;
    let (record, metadata) = blocking(move || reg.update_fdo(&pid, expected, req)).await?;
    let version = record.version;
    Ok(with_etag(json_response(StatusCode::OK, &FdoView { record, metadata }), version))
}

async fn delete_fdo(
    State(reg): State<AppState>,
    Path((prefix, suffix)): Path<(String, String)>,
    RawQuery(raw): RawQuery,
) -> ApiResult {
    let pid = path_pid(&prefix, &suffix)?;
    let reason = query_map(raw).remove("reason");
    let deletion = blocking(move || reg.delete_fdo(&pid, reason)).await?;
    if deletion.already_deleted {
        return Err(RegistryError::Gone(deletion.tombstone).into());
    }
    Ok(json_response(StatusCode::OK, &deletion.tombstone))
}

fn metadata_response(reg: &Registry, pid: &Pid) -> ApiResult {
    let record = gone_or(reg.get_metadata(pid)?)?;
    let version = record.version;
    Ok(with_etag(json_response(StatusCode::OK, &record), version))
}

async fn get_fdo_metadata(State(reg): State<AppState>, Path((prefix, suffix)): Path<(String, String)>) -> ApiResult {
    let pid = path_pid(&prefix, &suffix)?;
    let meta_pid = reg.metadata_pid_for(&pid)?;
    metadata_response(&reg, &meta_pid)
}

async fn get_metadata(State(reg): State<AppState>, Path((prefix, suffix)): Path<(String, String)>) -> ApiResult {
    let pid = path_pid(&prefix, &suffix)?;
    metadata_response(&reg, &pid)
}

async fn operations_for(State(reg): State<AppState>, Path((prefix, suffix)): Path<(String, String)>) -> ApiResult {
    let pid = path_pid(&prefix, &suffix)?;
    Ok(json_response(StatusCode::OK, &reg.operations_for(&pid)?))
}

async fn list_operations(State(reg): State<AppState>) -> Response {
    json_response(StatusCode::OK, &reg.list_operations())
}

async fn register_operation(State(reg): State<AppState>, body: Bytes) -> ApiResult {
    let descriptor: OperationDescriptor = parse_body(&body)?;
    let stored = blocking(move || reg.register_operation(descriptor)).await?;
    Ok(json_response(StatusCode::CREATED, &stored))
}

fn edge_views(reg: &Registry, edges: Vec<Edge>) -> Vec<EdgeView> {
    reg.read(|state| {
        edges
            .into_iter()
            .map(|edge| EdgeView {
                from_status: state
                    .metadata(&edge.from)
                    .map_or(RecordStatus::Active, |m| m.status),
                edge,
            })
            .collect()
    })
}

async fn citations(State(reg): State<AppState>, Path((prefix, suffix)): Path<(String, String)>) -> ApiResult {
    let pid = path_pid(&prefix, &suffix)?;
    let edges = reg.edges_from(&pid, Some(EdgeLabel::Citation))?;
    Ok(json_response(StatusCode::OK, &edge_views(&reg, edges)))
}

async fn cited_by(State(reg): State<AppState>, Path((prefix, suffix)): Path<(String, String)>) -> ApiResult {
    let pid = path_pid(&prefix, &suffix)?;
    let edges = reg.edges_to(&pid, Some(EdgeLabel::Citation))?;
    Ok(json_response(StatusCode::OK, &edge_views(&reg, edges)))
}

async fn relations(
    State(reg): State<AppState>,
    Path((prefix, suffix)): Path<(String, String)>,
    RawQuery(raw): RawQuery,
) -> ApiResult {
    let pid = path_pid(&prefix, &suffix)?;
    let q = query_map(raw);
    let direction: Direction = query_param(&q, "direction")?.unwrap_or(Direction::Outbound);
    let label: Option<EdgeLabel> = query_param(&q, "label")?;
    let edges = match direction {
        Direction::Outbound => reg.edges_from(&pid, label)?,
        Direction::Inbound => reg.edges_to(&pid, label)?,
    };
    Ok(json_response(StatusCode::OK, &edge_views(&reg, edges)))
}

async fn closure(
    State(reg): State<AppState>,
    Path((prefix, suffix)): Path<(String, String)>,
    RawQuery(raw): RawQuery,
) -> ApiResult {
    let pid = path_pid(&prefix, &suffix)?;
    let q = query_map(raw);
    let direction: Direction = query_param(&q, "direction")?.unwrap_or(Direction::Outbound);
    let max_depth: u32 = query_param(&q, "max_depth")?
        .ok_or_else(|| ApiError::bad_request("INVALID_QUERY", "max_depth is required"))?;
    Ok(json_response(StatusCode::OK, &reg.citation_closure(&pid, direction, max_depth)?))
}

async fn validate(State(reg): State<AppState>, body: Bytes) -> ApiResult {
    let req: ValidateRequest = parse_body(&body)?;
    Ok(json_response(StatusCode::OK, &reg.validate(&req.class, &req.properties)))
}

async fn resolve_pid(State(reg): State<AppState>, Path((prefix, suffix)): Path<(String, String)>) -> ApiResult {
    let pid = path_pid(&prefix, &suffix)?;
    Ok(json_response(StatusCode::OK, &reg.resolve_any(&pid)?))
}

async fn all_schemas() -> Response {
    let all: Vec<_> = MetadataClass::ALL.into_iter().map(metadata::class_schema).collect();
    json_response(StatusCode::OK, &all)
}

async fn class_schema(Path(class): Path<String>) -> ApiResult {
    let schema = metadata::class_schema_by_name(&class)
        .map_err(|e| ApiError::new(StatusCode::NOT_FOUND, "UNKNOWN_CLASS", e.to_string()))?;
    Ok(json_response(StatusCode::OK, schema))
}
