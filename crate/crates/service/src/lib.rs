//! HTTP front end over immutable, content-addressed corpus snapshots.
//!
//! | route | body / query | response |
//! |---|---|---|
//! | `POST /corpus` | corpus document | `{"snapshot_id", "stats"}` |
//! | `POST /query` | `{snapshot_id, expr \| ast}` | match report |
//! | `POST /recommend` | `{snapshot_id, expr \| ast, k?}` | recommendation list |
//! | `GET /projection` | `snapshot_id, method?, seed?` | projection points |
//! | `GET /stats` | `snapshot_id` | corpus statistics |

mod error;

use std::collections::HashMap;
use std::sync::{Arc, RwLock};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Query, State};
use axum::http::{header, HeaderName, HeaderValue};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::Deserialize;
use sha2::{Digest, Sha256};
use treequery::api::{self, DEFAULT_K, DEFAULT_SEED};
use treequery::similarity::Method;
use treequery::{format, load_corpus, Corpus};

pub use error::ApiError;

/// Response header carrying the canonical text of the evaluated expression.
pub const EXPR_HEADER: &str = "x-treequery-expr";

#[derive(Debug, Clone)]
pub struct Config {
    pub max_corpus_nodes: usize,
    pub max_body_bytes: usize,
    pub timeout: Duration,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            max_corpus_nodes: 1_000_000,
            max_body_bytes: 512 << 20,
            timeout: Duration::from_secs(60),
        }
    }
}

impl Config {
    /// Defaults overridden by `TQ_MAX_CORPUS_NODES` and `TQ_TIMEOUT_MS`.
    pub fn from_env() -> Self {
        let mut c = Config::default();
        let var = |name: &str| std::env::var(name).ok().and_then(|v| v.parse::<u64>().ok());
        if let Some(n) = var("TQ_MAX_CORPUS_NODES") {
            c.max_corpus_nodes = n as usize;
        }
        if let Some(ms) = var("TQ_TIMEOUT_MS") {
            c.timeout = Duration::from_millis(ms);
        }
        c
    }
}

pub struct Snapshot {
    pub id: String,
    pub corpus: Corpus,
}

#[derive(Clone)]
pub struct AppState {
    config: Arc<Config>,
    snapshots: Arc<RwLock<HashMap<String, Arc<Snapshot>>>>,
}

impl AppState {
    pub fn new(config: Config) -> Self {
        AppState {
            config: Arc::new(config),
            snapshots: Arc::default(),
        }
    }

    fn snapshot(&self, id: &str) -> Result<Arc<Snapshot>, ApiError> {
        self.snapshots
            .read()
            .expect("snapshot registry poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::UnknownSnapshot(id.to_string()))
    }

    /// Registers a corpus under the hash of its canonical document.
    pub fn insert(&self, corpus: Corpus) -> Arc<Snapshot> {
        let id = snapshot_id(&corpus);
        let mut map = self.snapshots.write().expect("snapshot registry poisoned");
        map.entry(id.clone())
            .or_insert_with(|| Arc::new(Snapshot { id, corpus }))
            .clone()
    }

    /// Runs a computation off the async workers, bounded by the timeout.
    async fn run<T: Send + 'static>(&self, f: impl FnOnce() -> T + Send + 'static) -> Result<T, ApiError> {
        let limit = self.config.timeout;
        match tokio::time::timeout(limit, tokio::task::spawn_blocking(f)).await {
            Ok(Ok(v)) => Ok(v),
            Ok(Err(e)) => Err(ApiError::Internal(e.to_string())),
            Err(_) => Err(ApiError::Timeout(limit.as_millis() as u64)),
        }
    }
}

pub fn snapshot_id(corpus: &Corpus) -> String {
    hex::encode(Sha256::digest(corpus.to_json().as_bytes()))
}

pub fn router(state: AppState) -> Router {
    let limit = state.config.max_body_bytes;
    Router::new()
        .route("/corpus", post(upload))
        .route("/query", post(query))
        .route("/recommend", post(recommend))
        .route("/projection", get(projection))
        .route("/stats", get(stats))
        .layer(DefaultBodyLimit::max(limit))
        .with_state(state)
}

pub fn app(config: Config) -> Router {
    router(AppState::new(config))
}

fn json_response(body: String) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn decode<T: for<'de> Deserialize<'de>>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::BadRequest(e.to_string()))
}

async fn upload(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let limit = state.config.max_corpus_nodes;
    let st = state.clone();
    // ingest is bounded by the node limit rather than the compute timeout
    let body = tokio::task::spawn_blocking(move || -> Result<String, ApiError> {
        let corpus = load_corpus(&body)?;
        let nodes = corpus.node_count();
        if nodes > limit {
            return Err(ApiError::CorpusTooLarge { nodes, limit });
        }
        let snap = st.insert(corpus);
        Ok(format!(
            r#"{{"snapshot_id":"{}","stats":{}}}"#,
            snap.id,
            api::stats_json(&snap.corpus)
        ))
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))??;
    Ok(json_response(body))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExprRequest {
    snapshot_id: String,
    expr: Option<String>,
    ast: Option<serde_json::Value>,
    k: Option<usize>,
}

fn expr_header(text: &str) -> Option<(HeaderName, HeaderValue)> {
    HeaderValue::from_bytes(text.as_bytes())
        .ok()
        .map(|v| (HeaderName::from_static(EXPR_HEADER), v))
}

async fn query(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let req: ExprRequest = decode(&body)?;
    if req.k.is_some() {
        return Err(ApiError::BadRequest("`k` applies to /recommend only".into()));
    }
    let snap = state.snapshot(&req.snapshot_id)?;
    let target = api::resolve_target(req.expr.as_deref(), req.ast.as_ref(), &snap.corpus.attribute_schema)?;
    let canonical = format(&target);
    let body = state.run(move || api::query_json(&target, &snap.corpus)).await?;
    let mut resp = json_response(body);
    if let Some((name, value)) = expr_header(&canonical) {
        resp.headers_mut().insert(name, value);
    }
    Ok(resp)
}

async fn recommend(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let req: ExprRequest = decode(&body)?;
    let snap = state.snapshot(&req.snapshot_id)?;
    let target = api::resolve_target(req.expr.as_deref(), req.ast.as_ref(), &snap.corpus.attribute_schema)?;
    let k = req.k.unwrap_or(DEFAULT_K);
    let body = state.run(move || api::recommend_json(&target, &snap.corpus, k)).await?;
    Ok(json_response(body))
}

#[derive(Deserialize)]
struct ProjectionParams {
    snapshot_id: String,
    method: Option<String>,
    seed: Option<u64>,
}

async fn projection(
    State(state): State<AppState>,
    Query(params): Query<ProjectionParams>,
) -> Result<Response, ApiError> {
    let snap = state.snapshot(&params.snapshot_id)?;
    let method = match params.method.as_deref() {
        None => Method::default(),
        Some(m) => m.parse::<Method>().map_err(ApiError::BadRequest)?,
    };
    let seed = params.seed.unwrap_or(DEFAULT_SEED);
    let body = state.run(move || api::project_json(&snap.corpus, method, seed)).await?;
    Ok(json_response(body))
}

#[derive(Deserialize)]
struct StatsParams {
    snapshot_id: String,
}

async fn stats(State(state): State<AppState>, Query(params): Query<StatsParams>) -> Result<Response, ApiError> {
    let snap = state.snapshot(&params.snapshot_id)?;
    Ok(json_response(api::stats_json(&snap.corpus)))
}

/// Serves the API on an already bound listener until the task is dropped.
pub async fn serve(listener: tokio::net::TcpListener, config: Config) -> std::io::Result<()> {
    axum::serve(listener, app(config)).await
}
