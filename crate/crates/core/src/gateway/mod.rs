//! Long-running HTTP gateway: tool selection for LLM orchestrators over a
//! JSON API, with atomic reindexing and an optional response cache.
//!
//! Routes:
//! - `POST /v1/select` `{query, k?, threshold?}` — ranked LLM-ready tool
//!   definitions plus scores, token reduction, and retrieval latency
//! - `POST /v1/reindex` — rediscover and rebuild, then atomically swap
//! - `GET /v1/health` — catalog size/hash, provider, dimension
//! - `GET /v1/tools` — the full namespaced catalog
//!
//! Every handler reads one immutable snapshot reference for the whole
//! request, and each response is stamped with that snapshot's catalog
//! hash, so a reindex in flight can never produce a mixed view. Tool names
//! are namespaced `server_id.name` because multi-server catalogs collide.

mod cache;

pub use cache::{CacheKey, LruCache};

use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::thread::JoinHandle;

use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;
use tokio::sync::oneshot;

use crate::config::{AppConfig, GatewaySettings};
use crate::document::EnrichmentTable;
use crate::embedding::Provider;
use crate::index::{build, BuildError, IndexSnapshot, IndexedTool};
use crate::mcp::{snapshot_catalog, McpError};
use crate::pipeline::{select_tools, PipelineError};

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("invalid gateway configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Discovery(#[from] McpError),
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error("enrichment sidecar: {0}")]
    Enrichment(String),
    #[error("failed to bind {addr}: {reason}")]
    Bind { addr: String, reason: String },
    #[error("runtime error: {0}")]
    Runtime(String),
}

struct ServiceState {
    snapshot: RwLock<Arc<IndexSnapshot>>,
    provider: Provider,
    config: AppConfig,
    settings: GatewaySettings,
    cache: Mutex<LruCache>,
    reindexing: AtomicBool,
    reindex_serialize: Mutex<()>,
    auth_token: Option<String>,
}

/// Handle to a running gateway. Dropping it shuts the service down.
#[derive(Debug)]
pub struct RunningGateway {
    addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl RunningGateway {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Block until the serving thread exits (it only exits on shutdown).
    pub fn wait(mut self) {
        if let Some(thread) = self.thread.take() {
            let _ = thread.join();
        }
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(thread) = self.thread.take() {
            let _ = thread.join();
        }
    }
}

impl Drop for RunningGateway {
    fn drop(&mut self) {
        self.stop();
    }
}

fn load_enrichments(config: &AppConfig) -> Result<EnrichmentTable, GatewayError> {
    match &config.enrichment_path {
        Some(path) => EnrichmentTable::load(path)
            .map_err(|e| GatewayError::Enrichment(e.to_string())),
        None => Ok(EnrichmentTable::empty()),
    }
}

fn initial_state(config: AppConfig) -> Result<ServiceState, GatewayError> {
    if config.endpoints.is_empty() {
        return Err(GatewayError::Config("no MCP servers configured".into()));
    }
    let provider = Provider::new(&config.provider)
        .map_err(|e| GatewayError::Config(e.to_string()))?;
    let enrichments = load_enrichments(&config)?;
    let catalog = snapshot_catalog(&config.endpoints, config.discovery_mode)?;
    let snapshot = build(&catalog, &provider, &enrichments, &config.tokenizer)?;

    let auth_token = match &config.gateway.auth_token_env {
        Some(var) => Some(std::env::var(var).map_err(|_| {
            GatewayError::Config(format!("auth token env var `{var}` is not set"))
        })?),
        None => None,
    };
    let settings = config.gateway.clone();
    let capacity = if settings.cache_enabled {
        settings.cache_capacity
    } else {
        0
    };
    Ok(ServiceState {
        snapshot: RwLock::new(Arc::new(snapshot)),
        provider,
        config,
        settings,
        cache: Mutex::new(LruCache::new(capacity)),
        reindexing: AtomicBool::new(false),
        reindex_serialize: Mutex::new(()),
        auth_token,
    })
}

/// Build the initial index (failing fast if discovery or the build fails),
/// bind the listen address, and serve on a background thread.
pub fn launch(config: AppConfig) -> Result<RunningGateway, GatewayError> {
    let listen = config.gateway.listen.clone();
    let state = Arc::new(initial_state(config)?);

    let runtime = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()
        .map_err(|e| GatewayError::Runtime(e.to_string()))?;
    let listener = runtime
        .block_on(tokio::net::TcpListener::bind(&listen))
        .map_err(|e| GatewayError::Bind {
            addr: listen.clone(),
            reason: e.to_string(),
        })?;
    let addr = listener
        .local_addr()
        .map_err(|e| GatewayError::Runtime(e.to_string()))?;

    let app = router(state);
    let (shutdown_tx, shutdown_rx) = oneshot::channel::<()>();
    let thread = std::thread::spawn(move || {
        runtime.block_on(async move {
            let _ = axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = shutdown_rx.await;
                })
                .await;
        });
    });

    Ok(RunningGateway {
        addr,
        shutdown: Some(shutdown_tx),
        thread: Some(thread),
    })
}

/// Launch and block until shut down externally.
pub fn serve(config: AppConfig) -> Result<(), GatewayError> {
    let running = launch(config)?;
    eprintln!("toolgate gateway listening on {}", running.addr());
    running.wait();
    Ok(())
}

fn router(state: Arc<ServiceState>) -> Router {
    Router::new()
        .route("/v1/select", post(select_handler))
        .route("/v1/reindex", post(reindex_handler))
        .route("/v1/health", get(health_handler))
        .route("/v1/tools", get(tools_handler))
        .with_state(state)
}

#[derive(Debug, Deserialize)]
struct SelectRequest {
    query: String,
    k: Option<i64>,
    threshold: Option<f32>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ToolDefinition {
    /// Namespaced `server_id.name`.
    pub name: String,
    pub description: String,
    pub input_schema: Value,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SelectResponse {
    pub catalog_hash: String,
    pub k: usize,
    pub threshold: Option<f32>,
    pub fallback_applied: bool,
    pub trr: f64,
    pub latency_ms: f64,
    pub tools: Vec<ToolDefinition>,
    pub scores: Vec<f32>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct HealthResponse {
    pub catalog_size: usize,
    pub catalog_hash: String,
    pub provider_id: String,
    pub dimension: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ReindexResponse {
    pub rebuilt: bool,
    pub catalog_hash: String,
    pub catalog_size: usize,
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
}

fn error_response(status: StatusCode, message: impl Into<String>) -> Response {
    (
        status,
        Json(ErrorBody {
            error: message.into(),
        }),
    )
        .into_response()
}

/// Returns the 401 response when the request is not allowed through.
fn check_auth(state: &ServiceState, headers: &HeaderMap) -> Option<Response> {
    let expected = state.auth_token.as_ref()?;
    let presented = headers
        .get("authorization")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "));
    if presented == Some(expected.as_str()) {
        None
    } else {
        Some(error_response(StatusCode::UNAUTHORIZED, "invalid bearer token"))
    }
}

fn tool_definition(entry: &IndexedTool) -> ToolDefinition {
    let raw: Value = serde_json::from_str(&entry.raw_schema_text).unwrap_or(Value::Null);
    let description = raw
        .get("description")
        .and_then(Value::as_str)
        .unwrap_or("")
        .to_string();
    let input_schema = raw
        .get("inputSchema")
        .cloned()
        .unwrap_or_else(|| serde_json::json!({"type": "object"}));
    ToolDefinition {
        name: entry.tool_key.to_string(),
        description,
        input_schema,
    }
}

enum SelectFailure {
    Reindexing,
    Pipeline(PipelineError),
}

/// The synchronous selection path shared by cached and uncached requests.
/// Returns the response body bytes plus whether they came from the cache.
fn perform_select(
    state: &ServiceState,
    query: &str,
    k: usize,
    threshold: Option<f32>,
) -> Result<(String, bool), SelectFailure> {
    if !state.settings.serve_during_reindex && state.reindexing.load(Ordering::SeqCst) {
        return Err(SelectFailure::Reindexing);
    }
    let snapshot = state.snapshot.read().expect("snapshot lock").clone();
    let cache_key = CacheKey {
        catalog_hash: snapshot.catalog_hash.clone(),
        provider_id: snapshot.provider_id.clone(),
        query: query.to_string(),
        k,
        threshold_bits: threshold.map(f32::to_bits),
    };
    if state.settings.cache_enabled {
        let mut cache = state.cache.lock().expect("cache lock");
        if let Some(body) = cache.get(&cache_key) {
            return Ok((body, true));
        }
    }

    let selection = select_tools(&snapshot, &state.provider, query, k, threshold)
        .map_err(SelectFailure::Pipeline)?;
    let tools: Vec<ToolDefinition> = selection
        .ranked
        .iter()
        .filter_map(|r| snapshot.entry(&r.key))
        .map(tool_definition)
        .collect();
    let scores: Vec<f32> = selection.ranked.iter().map(|r| r.score).collect();
    let response = SelectResponse {
        catalog_hash: snapshot.catalog_hash.clone(),
        k,
        threshold,
        fallback_applied: selection.fallback_applied,
        trr: selection.trr,
        latency_ms: selection.retrieval_latency_ms,
        tools,
        scores,
    };
    let body = serde_json::to_string(&response).expect("response serialization");
    if state.settings.cache_enabled {
        let mut cache = state.cache.lock().expect("cache lock");
        cache.insert(cache_key, body.clone());
    }
    Ok((body, false))
}

async fn select_handler(
    State(state): State<Arc<ServiceState>>,
    headers: HeaderMap,
    body: Result<Json<SelectRequest>, axum::extract::rejection::JsonRejection>,
) -> Response {
    if let Some(denied) = check_auth(&state, &headers) {
        return denied;
    }
    let Json(request) = match body {
        Ok(json) => json,
        Err(rejection) => {
            return error_response(StatusCode::BAD_REQUEST, rejection.to_string());
        }
    };
    if request.query.trim().is_empty() {
        return error_response(StatusCode::BAD_REQUEST, "query must be non-empty");
    }
    let k = match request.k {
        None => state.settings.default_k,
        Some(k) if k >= 1 => k as usize,
        Some(k) => {
            return error_response(StatusCode::BAD_REQUEST, format!("k must be >= 1, got {k}"));
        }
    };
    let threshold = request.threshold.or(state.settings.default_threshold);

    let cache_enabled = state.settings.cache_enabled;
    let worker = state.clone();
    let result = tokio::task::spawn_blocking(move || {
        perform_select(&worker, &request.query, k, threshold)
    })
    .await;

    match result {
        Ok(Ok((body, cache_hit))) => {
            let mut response = Response::new(body.into());
            response.headers_mut().insert(
                "content-type",
                "application/json".parse().expect("static header"),
            );
            if cache_enabled {
                let value = if cache_hit { "hit" } else { "miss" };
                response
                    .headers_mut()
                    .insert("x-cache", value.parse().expect("static header"));
            }
            response
        }
        Ok(Err(SelectFailure::Reindexing)) => error_response(
            StatusCode::SERVICE_UNAVAILABLE,
            "reindex in progress; retry shortly",
        ),
        Ok(Err(SelectFailure::Pipeline(e))) => {
            error_response(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
        }
        Err(join_err) => error_response(StatusCode::INTERNAL_SERVER_ERROR, join_err.to_string()),
    }
}

/// Clears the in-progress flag however the rebuild ends.
struct ReindexFlagGuard<'a>(&'a AtomicBool);

impl Drop for ReindexFlagGuard<'_> {
    fn drop(&mut self) {
        self.0.store(false, Ordering::SeqCst);
    }
}

/// Rebuild from fresh discovery off to the side, then atomically publish.
/// Any failure leaves the serving snapshot untouched.
fn perform_reindex(state: &ServiceState) -> Result<ReindexResponse, String> {
    let _serialized = state.reindex_serialize.lock().expect("reindex lock");
    state.reindexing.store(true, Ordering::SeqCst);
    let _flag = ReindexFlagGuard(&state.reindexing);

    let enrichments = load_enrichments(&state.config).map_err(|e| e.to_string())?;
    let catalog = snapshot_catalog(&state.config.endpoints, state.config.discovery_mode)
        .map_err(|e| e.to_string())?;
    let new_snapshot = build(&catalog, &state.provider, &enrichments, &state.config.tokenizer)
        .map_err(|e| e.to_string())?;

    let response = ReindexResponse {
        rebuilt: true,
        catalog_hash: new_snapshot.catalog_hash.clone(),
        catalog_size: new_snapshot.len(),
    };
    let mut slot = state.snapshot.write().expect("snapshot lock");
    *slot = Arc::new(new_snapshot);
    drop(slot);
    state.cache.lock().expect("cache lock").clear();
    Ok(response)
}

async fn reindex_handler(
    State(state): State<Arc<ServiceState>>,
    headers: HeaderMap,
) -> Response {
    if let Some(denied) = check_auth(&state, &headers) {
        return denied;
    }
    let worker = state.clone();
    match tokio::task::spawn_blocking(move || perform_reindex(&worker)).await {
        Ok(Ok(response)) => (StatusCode::OK, Json(response)).into_response(),
        Ok(Err(reason)) => error_response(
            StatusCode::INTERNAL_SERVER_ERROR,
            format!("reindex failed, previous snapshot still serving: {reason}"),
        ),
        Err(join_err) => error_response(StatusCode::INTERNAL_SERVER_ERROR, join_err.to_string()),
    }
}

async fn health_handler(
    State(state): State<Arc<ServiceState>>,
    headers: HeaderMap,
) -> Response {
    if let Some(denied) = check_auth(&state, &headers) {
        return denied;
    }
    let snapshot = state.snapshot.read().expect("snapshot lock").clone();
    Json(HealthResponse {
        catalog_size: snapshot.len(),
        catalog_hash: snapshot.catalog_hash.clone(),
        provider_id: snapshot.provider_id.clone(),
        dimension: snapshot.dimension,
    })
    .into_response()
}

async fn tools_handler(
    State(state): State<Arc<ServiceState>>,
    headers: HeaderMap,
) -> Response {
    if let Some(denied) = check_auth(&state, &headers) {
        return denied;
    }
    let snapshot = state.snapshot.read().expect("snapshot lock").clone();
    let tools: Vec<ToolDefinition> = snapshot.entries.iter().map(tool_definition).collect();
    Json(serde_json::json!({
        "catalog_hash": snapshot.catalog_hash,
        "tools": tools,
    }))
    .into_response()
}
