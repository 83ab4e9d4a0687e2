//! Read-only HTTP JSON API over a loaded bundle.
//!
//! Every response body carries a `config` object echoing the bundle
//! configuration it was computed from. The bundle is swapped atomically on
//! SIGHUP; a request always works against a single bundle snapshot.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};
use std::time::Duration;

use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Redirect, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::Serialize;
use tokio::sync::Notify;
use tower_http::cors::{AllowOrigin, CorsLayer};
use tower_http::services::ServeDir;

use crate::bundle::Bundle;
use crate::corpus::Document;
use crate::embedding::{Metric, Mode};
use crate::error::{Error, Result};
use crate::graph::{ConnectivityReport, MetricsOptions};
use crate::index::{NeighborList, Source};

pub const DEFAULT_PORT: u16 = 8040;
pub const SNIPPET_CHARS: usize = 280;

/// Bundle configuration echoed in every response.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigEcho {
    #[serde(rename = "M")]
    pub m: usize,
    pub mode: Mode,
    pub metric: Metric,
    pub nw: usize,
    pub ne: usize,
    pub cache_k: usize,
    pub positive_only: bool,
    pub n: usize,
    pub lexicon_hash: String,
    pub created_at: u64,
}

impl ConfigEcho {
    pub fn of(bundle: &Bundle) -> Self {
        let c = bundle.config();
        Self {
            m: c.m,
            mode: c.mode,
            metric: c.metric,
            nw: c.nw,
            ne: c.ne,
            cache_k: c.cache_k,
            positive_only: c.positive_only,
            n: bundle.meta.n,
            lexicon_hash: bundle.meta.lexicon_hash.clone(),
            created_at: bundle.meta.created_at,
        }
    }
}

/// Cut `text` to at most [`SNIPPET_CHARS`] characters, ending on a word boundary.
pub fn snippet(text: &str) -> String {
    if text.chars().count() <= SNIPPET_CHARS {
        return text.to_string();
    }
    let cut: String = text.chars().take(SNIPPET_CHARS - 1).collect();
    let end = cut.rfind(char::is_whitespace).filter(|&i| i > 0).unwrap_or(cut.len());
    format!("{}…", cut[..end].trim_end())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NeighborBody {
    pub id: String,
    pub score: f64,
    pub rank: usize,
    pub source: Source,
    pub snippet: String,
    pub lang: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image_url: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NeighborsBody {
    pub config: ConfigEcho,
    pub id: String,
    pub nw: usize,
    pub ne: usize,
    pub word: Vec<NeighborBody>,
    pub emb: Vec<NeighborBody>,
    pub word_empty: bool,
    pub emb_empty: bool,
}

fn neighbor_body(bundle: &Bundle, list: &NeighborList, pick: fn(&crate::index::NeighborEntry) -> Option<crate::index::Ranked>) -> Vec<NeighborBody> {
    let mut out: Vec<NeighborBody> = list
        .entries
        .iter()
        .filter_map(|e| {
            let ranked = pick(e)?;
            let doc = &bundle.corpus.documents()[e.doc];
            Some(NeighborBody {
                id: doc.id.clone(),
                score: ranked.score,
                rank: ranked.rank,
                source: e.source(),
                snippet: snippet(&doc.text),
                lang: doc.lang.clone(),
                image_url: doc.image_url.clone(),
            })
        })
        .collect();
    out.sort_by_key(|b| b.rank);
    out
}

/// Neighbor payload shared by the HTTP endpoint and the `neighbors` command.
pub fn neighbors_body(bundle: &Bundle, id: &str, nw: usize, ne: usize) -> Result<NeighborsBody> {
    let list = bundle.neighbors(id, nw, ne)?;
    Ok(NeighborsBody {
        config: ConfigEcho::of(bundle),
        id: id.to_string(),
        nw,
        ne,
        word: neighbor_body(bundle, &list, |e| e.word),
        emb: neighbor_body(bundle, &list, |e| e.embedding),
        word_empty: list.word_empty,
        emb_empty: list.embedding_empty,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsBody {
    pub config: ConfigEcho,
    #[serde(flatten)]
    pub report: ConnectivityReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DocumentBody {
    pub config: ConfigEcho,
    #[serde(flatten)]
    pub document: Document,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchHit {
    pub id: String,
    pub score: f64,
    pub snippet: String,
    pub lang: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image_url: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchBody {
    pub config: ConfigEcho,
    pub query: String,
    pub terms: Vec<String>,
    pub results: Vec<SearchHit>,
}

pub fn search_body(bundle: &Bundle, query: &str, lang: Option<&str>, n: usize) -> Result<SearchBody> {
    let terms = bundle.encode_query(query, lang);
    if terms.is_empty() {
        return Err(Error::EmptyQuery(query.to_string()));
    }
    let hits = bundle.index.search_terms(&terms, n)?;
    Ok(SearchBody {
        config: ConfigEcho::of(bundle),
        query: query.to_string(),
        terms: terms.iter().filter_map(|&t| bundle.lexicon.term(t).map(str::to_string)).collect(),
        results: hits
            .into_iter()
            .map(|(doc, score)| {
                let d = &bundle.corpus.documents()[doc];
                SearchHit {
                    id: d.id.clone(),
                    score,
                    snippet: snippet(&d.text),
                    lang: d.lang.clone(),
                    image_url: d.image_url.clone(),
                }
            })
            .collect(),
    })
}

#[derive(Debug, Clone)]
pub struct ServiceOptions {
    pub metrics: MetricsOptions,
    /// How long a metrics request waits before answering 202.
    pub sync_wait: Duration,
    pub static_dir: Option<PathBuf>,
}

impl Default for ServiceOptions {
    fn default() -> Self {
        Self {
            metrics: MetricsOptions::default(),
            sync_wait: Duration::from_secs(2),
            static_dir: None,
        }
    }
}

type JobResult = std::result::Result<Arc<MetricsBody>, String>;

#[derive(Default)]
struct Job {
    result: Mutex<Option<JobResult>>,
    done: Notify,
}

impl Job {
    fn result(&self) -> Option<JobResult> {
        self.result.lock().expect("job lock").clone()
    }
}

struct Shared {
    bundle: RwLock<Arc<Bundle>>,
    bundle_path: Option<PathBuf>,
    jobs: Mutex<HashMap<String, Arc<Job>>>,
    options: ServiceOptions,
}

#[derive(Clone)]
pub struct AppState {
    shared: Arc<Shared>,
}

impl AppState {
    pub fn new(bundle: Arc<Bundle>, bundle_path: Option<PathBuf>, options: ServiceOptions) -> Self {
        Self {
            shared: Arc::new(Shared {
                bundle: RwLock::new(bundle),
                bundle_path,
                jobs: Mutex::new(HashMap::new()),
                options,
            }),
        }
    }

    pub fn bundle(&self) -> Arc<Bundle> {
        self.shared.bundle.read().expect("bundle lock").clone()
    }

    /// Swap in a new bundle and forget memoized metrics.
    pub fn replace_bundle(&self, bundle: Arc<Bundle>) {
        let mut jobs = self.shared.jobs.lock().expect("jobs lock");
        *self.shared.bundle.write().expect("bundle lock") = bundle;
        jobs.clear();
    }

    /// Reload the bundle from disk, keeping the current one on failure.
    pub fn reload(&self) -> Result<()> {
        let Some(path) = &self.shared.bundle_path else {
            return Ok(());
        };
        let bundle = Bundle::load(path)?;
        self.replace_bundle(Arc::new(bundle));
        Ok(())
    }
}

fn error_code(err: &Error) -> (StatusCode, &'static str) {
    match err {
        Error::UnknownDocument(_) => (StatusCode::NOT_FOUND, "not_found"),
        Error::EmptyQuery(_) => (StatusCode::CONFLICT, "empty_query"),
        Error::ExceedsCache { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "exceeds_cache"),
        Error::InvalidConfig(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_request"),
        _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
    }
}

#[derive(Serialize)]
struct ErrorBody {
    error: &'static str,
    message: String,
    config: ConfigEcho,
}

fn error_response(status: StatusCode, code: &'static str, message: String, bundle: &Bundle) -> Response {
    (
        status,
        Json(ErrorBody {
            error: code,
            message,
            config: ConfigEcho::of(bundle),
        }),
    )
        .into_response()
}

fn from_error(err: Error, bundle: &Bundle) -> Response {
    let (status, code) = error_code(&err);
    error_response(status, code, err.to_string(), bundle)
}

fn count_param(params: &HashMap<String, String>, key: &str, default: usize) -> Result<usize> {
    match params.get(key).map(|s| s.trim()).filter(|s| !s.is_empty()) {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("{key} must be a non-negative integer, got {v:?}"))),
    }
}

async fn healthz() -> impl IntoResponse {
    Json(serde_json::json!({ "status": "ok" }))
}

async fn config(State(state): State<AppState>) -> Response {
    let bundle = state.bundle();
    Json(serde_json::json!({
        "config": ConfigEcho::of(&bundle),
        "lexicon_size": bundle.meta.lexicon_size,
        "dim": bundle.meta.dim,
        "empty_documents": bundle.meta.empty_documents,
        "default_lang": bundle.meta.default_lang,
        "languages": bundle.corpus.languages(),
    }))
    .into_response()
}

async fn document(State(state): State<AppState>, Path(id): Path<String>) -> Response {
    let bundle = state.bundle();
    match bundle.position(&id) {
        Ok(pos) => Json(DocumentBody {
            config: ConfigEcho::of(&bundle),
            document: bundle.corpus.documents()[pos].clone(),
        })
        .into_response(),
        Err(e) => from_error(e, &bundle),
    }
}

async fn neighbors(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(params): Query<HashMap<String, String>>,
) -> Response {
    let bundle = state.bundle();
    let result = (|| {
        let nw = count_param(&params, "nw", bundle.config().nw)?;
        let ne = count_param(&params, "ne", bundle.config().ne)?;
        neighbors_body(&bundle, &id, nw, ne)
    })();
    match result {
        Ok(body) => Json(body).into_response(),
        Err(e) => from_error(e, &bundle),
    }
}

async fn search(State(state): State<AppState>, Query(params): Query<HashMap<String, String>>) -> Response {
    let bundle = state.bundle();
    let q = params.get("q").map(String::as_str).unwrap_or("").trim();
    if q.is_empty() {
        return error_response(
            StatusCode::UNPROCESSABLE_ENTITY,
            "invalid_request",
            "q must be non-empty".into(),
            &bundle,
        );
    }
    let n = match count_param(&params, "n", 10) {
        Ok(n) => n,
        Err(e) => return from_error(e, &bundle),
    };
    match search_body(&bundle, q, params.get("lang").map(String::as_str), n) {
        Ok(body) => Json(body).into_response(),
        Err(Error::EmptyQuery(_)) => error_response(
            StatusCode::UNPROCESSABLE_ENTITY,
            "no_lexicon_terms",
            "no query token is in the lexicon".into(),
            &bundle,
        ),
        Err(e) => from_error(e, &bundle),
    }
}

fn job_token(nw: usize, ne: usize, mode: Mode) -> String {
    format!("{nw}-{ne}-{mode}")
}

#[derive(Serialize)]
struct PendingBody {
    status: &'static str,
    token: String,
    poll: String,
    config: ConfigEcho,
}

fn job_response(token: &str, result: Option<JobResult>, bundle: &Bundle) -> Response {
    match result {
        Some(Ok(body)) => Json(body.as_ref().clone()).into_response(),
        Some(Err(message)) => error_response(StatusCode::INTERNAL_SERVER_ERROR, "internal", message, bundle),
        None => (
            StatusCode::ACCEPTED,
            Json(PendingBody {
                status: "pending",
                token: token.to_string(),
                poll: format!("/metrics/jobs/{token}"),
                config: ConfigEcho::of(bundle),
            }),
        )
            .into_response(),
    }
}

async fn metrics(State(state): State<AppState>, Query(params): Query<HashMap<String, String>>) -> Response {
    let bundle = state.bundle();
    let parsed = (|| {
        let nw = count_param(&params, "nw", bundle.config().nw)?;
        let ne = count_param(&params, "ne", bundle.config().ne)?;
        let mode = match params.get("mode").filter(|m| !m.is_empty()) {
            Some(m) => m.parse::<Mode>()?,
            None => bundle.config().mode,
        };
        if nw + ne == 0 {
            return Err(Error::InvalidConfig("nw + ne must be at least 1".into()));
        }
        let k = bundle.config().cache_k;
        if nw.max(ne) > k {
            return Err(Error::ExceedsCache {
                requested: nw.max(ne),
                cached: k,
            });
        }
        Ok((nw, ne, mode))
    })();
    let (nw, ne, mode) = match parsed {
        Ok(p) => p,
        Err(e) => return from_error(e, &bundle),
    };

    let token = job_token(nw, ne, mode);
    let (job, fresh) = {
        let mut jobs = state.shared.jobs.lock().expect("jobs lock");
        match jobs.get(&token) {
            Some(job) => (job.clone(), false),
            None => {
                let job = Arc::new(Job::default());
                jobs.insert(token.clone(), job.clone());
                (job, true)
            }
        }
    };
    if fresh {
        let job = job.clone();
        let bundle = bundle.clone();
        let options = state.shared.options.metrics;
        tokio::task::spawn_blocking(move || {
            let result = bundle
                .metrics(nw, ne, mode, &options)
                .map(|report| {
                    Arc::new(MetricsBody {
                        config: ConfigEcho::of(&bundle),
                        report,
                    })
                })
                .map_err(|e| e.to_string());
            *job.result.lock().expect("job lock") = Some(result);
            job.done.notify_waiters();
        });
    }
    let notified = job.done.notified();
    if job.result().is_none() {
        let _ = tokio::time::timeout(state.shared.options.sync_wait, notified).await;
    }
    job_response(&token, job.result(), &bundle)
}

async fn metrics_job(State(state): State<AppState>, Path(token): Path<String>) -> Response {
    let bundle = state.bundle();
    let job = state.shared.jobs.lock().expect("jobs lock").get(&token).cloned();
    match job {
        Some(job) => job_response(&token, job.result(), &bundle),
        None => error_response(StatusCode::NOT_FOUND, "not_found", format!("no metrics job {token:?}"), &bundle),
    }
}

fn local_origin(origin: &HeaderValue) -> bool {
    let Ok(origin) = origin.to_str() else {
        return false;
    };
    let host = origin
        .strip_prefix("http://")
        .or_else(|| origin.strip_prefix("https://"))
        .unwrap_or("");
    let host = host.rsplit_once(':').map_or(host, |(h, port)| if port.chars().all(|c| c.is_ascii_digit()) { h } else { host });
    matches!(host, "localhost" | "127.0.0.1" | "[::1]")
}

pub fn router(state: AppState) -> Router {
    let cors = CorsLayer::new()
        .allow_origin(AllowOrigin::predicate(|origin, _| local_origin(origin)))
        .allow_methods([Method::GET])
        .allow_headers([header::CONTENT_TYPE]);
    let mut app = Router::new()
        .route("/healthz", get(healthz))
        .route("/config", get(config))
        .route("/documents/:id", get(document))
        .route("/documents/:id/neighbors", get(neighbors))
        .route("/metrics", get(metrics))
        .route("/metrics/jobs/:token", get(metrics_job))
        .route("/search", get(search));
    if let Some(dir) = &state.shared.options.static_dir {
        app = app
            .nest_service("/ui", ServeDir::new(dir).append_index_html_on_directories(true))
            .route("/", get(|| async { Redirect::temporary("/ui/") }));
    }
    app.layer(cors).with_state(state)
}

/// Serve until interrupted; SIGHUP reloads the bundle from disk.
pub async fn serve(bundle_path: PathBuf, addr: SocketAddr, options: ServiceOptions) -> Result<()> {
    let bundle = {
        let path = bundle_path.clone();
        tokio::task::spawn_blocking(move || Bundle::load(&path))
            .await
            .map_err(|e| Error::InvalidConfig(e.to_string()))??
    };
    let state = AppState::new(Arc::new(bundle), Some(bundle_path), options);
    #[cfg(unix)]
    {
        let state = state.clone();
        tokio::spawn(async move {
            use tokio::signal::unix::{signal, SignalKind};
            let Ok(mut hangup) = signal(SignalKind::hangup()) else {
                return;
            };
            while hangup.recv().await.is_some() {
                let state = state.clone();
                let outcome = tokio::task::spawn_blocking(move || state.reload()).await;
                match outcome {
                    Ok(Ok(())) => eprintln!("bundle reloaded"),
                    Ok(Err(e)) => eprintln!("bundle reload failed, keeping previous bundle: {e}"),
                    Err(e) => eprintln!("bundle reload failed: {e}"),
                }
            }
        });
    }
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
