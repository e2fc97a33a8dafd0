//! JSON search API over a loaded state directory.

use std::path::Path;
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::services::ServeDir;

use logrank_core::fusion::{Components, FusionWeights, QueryResult, SearchError};
use logrank_core::ranker::RankKind;
use logrank_core::state::{load_state, EngineState};

use crate::{CliError, ServeArgs};

/// Shared handle to the engine. Empty until the state directory has loaded;
/// a reload swaps the whole snapshot.
#[derive(Clone, Default)]
pub struct AppState {
    inner: Arc<RwLock<Option<Arc<EngineState>>>>,
}

impl AppState {
    pub fn loading() -> Self {
        Self::default()
    }

    pub fn ready(st: EngineState) -> Self {
        let s = Self::default();
        s.set(st);
        s
    }

    pub fn set(&self, st: EngineState) {
        *self.inner.write().unwrap_or_else(|e| e.into_inner()) = Some(Arc::new(st));
    }

    fn get(&self) -> Option<Arc<EngineState>> {
        self.inner.read().unwrap_or_else(|e| e.into_inner()).clone()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub page: String,
    pub score: f64,
    pub components: Components,
    pub position: usize,
}

impl From<QueryResult> for SearchHit {
    fn from(r: QueryResult) -> Self {
        Self {
            page: r.page,
            score: r.score,
            components: r.components,
            position: r.position,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResponse {
    pub query: String,
    pub k: usize,
    pub results: Vec<SearchHit>,
}

#[derive(Debug, Deserialize)]
pub struct SearchParams {
    q: Option<String>,
    k: Option<String>,
    w: Option<String>,
    #[serde(rename = "static")]
    static_kind: Option<String>,
}

#[derive(Debug, Deserialize)]
pub struct PageParams {
    id: Option<String>,
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

fn bad_request(msg: impl Into<String>) -> ApiError {
    ApiError(StatusCode::BAD_REQUEST, msg.into())
}

fn engine(app: &AppState) -> Result<Arc<EngineState>, ApiError> {
    app.get()
        .ok_or_else(|| ApiError(StatusCode::SERVICE_UNAVAILABLE, "state is still loading".into()))
}

async fn search(
    State(app): State<AppState>,
    Query(p): Query<SearchParams>,
) -> Result<Json<SearchResponse>, ApiError> {
    let q = p.q.unwrap_or_default();
    if q.trim().is_empty() {
        return Err(bad_request("empty query"));
    }
    let k = match p.k.as_deref() {
        None | Some("") => 10,
        Some(s) => s
            .parse::<usize>()
            .ok()
            .filter(|&k| k > 0)
            .ok_or_else(|| bad_request(format!("k must be a positive integer, got {s:?}")))?,
    };
    let weights = match p.w.as_deref() {
        None | Some("") => FusionWeights::default(),
        Some(s) => s.parse().map_err(|e: SearchError| bad_request(e.to_string()))?,
    };
    let kind = match p.static_kind.as_deref() {
        None | Some("") | Some("lpr") => RankKind::Lpr,
        Some("pr") => RankKind::Pr,
        Some(s) => return Err(bad_request(format!("static must be lpr or pr, got {s:?}"))),
    };
    let st = engine(&app)?;
    let results = st.engine.search(&q, k, weights, kind).map_err(|e| match e {
        SearchError::EngineNotLoaded(_) => ApiError(StatusCode::SERVICE_UNAVAILABLE, e.to_string()),
        _ => bad_request(e.to_string()),
    })?;
    Ok(Json(SearchResponse {
        query: q,
        k,
        results: results.into_iter().map(SearchHit::from).collect(),
    }))
}

async fn page(State(app): State<AppState>, Query(p): Query<PageParams>) -> Result<Json<Value>, ApiError> {
    let id = p.id.filter(|s| !s.is_empty()).ok_or_else(|| bad_request("missing id"))?;
    let st = engine(&app)?;
    let doc = st.engine.index().and_then(|i| i.doc(&id));
    let in_graph = st.graph.as_ref().is_some_and(|g| g.page_index(&id).is_some());
    if doc.is_none() && !in_graph {
        return Err(ApiError(StatusCode::NOT_FOUND, format!("unknown page {id:?}")));
    }
    let annotations: Vec<Value> = st
        .engine
        .social()
        .map(|(store, _)| {
            store
                .page_annotations(&id)
                .into_iter()
                .map(|(term, count)| json!({ "term": term, "count": count }))
                .collect()
        })
        .unwrap_or_default();
    let score = |k| st.engine.rank(k).and_then(|r| r.get(&id));
    Ok(Json(json!({
        "page": id,
        "title": doc.map(|d| d.title.clone()),
        "length": doc.map(|d| d.length),
        "retrievable": doc.is_some(),
        "annotations": annotations,
        "lpr": score(RankKind::Lpr),
        "pr": score(RankKind::Pr),
    })))
}

async fn stats(State(app): State<AppState>) -> Result<Json<Value>, ApiError> {
    Ok(Json(engine(&app)?.stats()))
}

async fn healthz() -> &'static str {
    "ok"
}

pub fn router(app: AppState) -> Router {
    Router::new()
        .route("/search", get(search))
        .route("/page", get(page))
        .route("/stats", get(stats))
        .route("/healthz", get(healthz))
        .with_state(app)
}

/// [`router`] plus static files from `ui` for every other path.
pub fn router_with_ui(app: AppState, ui: Option<&Path>) -> Router {
    match ui {
        Some(dir) => router(app).fallback_service(ServeDir::new(dir)),
        None => router(app),
    }
}

/// Bind, start answering (503 until the state is loaded), then load the
/// state in the background. A load failure stops the server.
pub fn serve(a: ServeArgs) -> Result<(), CliError> {
    if !a.state.is_dir() {
        return Err(CliError::Data(format!("{}: not a directory", a.state.display())));
    }
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Data(format!("runtime: {e}")))?;
    rt.block_on(async move {
        let addr = format!("{}:{}", a.host, a.port);
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| CliError::Data(format!("cannot bind {addr}: {e}")))?;
        eprintln!("serve: listening on http://{addr}");

        let app = AppState::loading();
        let failed: Arc<Mutex<Option<String>>> = Arc::default();
        let (fail_tx, fail_rx) = tokio::sync::oneshot::channel::<String>();
        let loader = app.clone();
        let dir = a.state.clone();
        tokio::spawn(async move {
            match tokio::task::spawn_blocking(move || load_state(&dir)).await {
                Ok(Ok(st)) => {
                    let docs = st.engine.index().map_or(0, |i| i.doc_count());
                    loader.set(st);
                    eprintln!("serve: state loaded, {docs} documents");
                }
                Ok(Err(e)) => {
                    let _ = fail_tx.send(e.to_string());
                }
                Err(e) => {
                    let _ = fail_tx.send(format!("loader crashed: {e}"));
                }
            }
        });

        let failed_set = failed.clone();
        let shutdown = async move {
            tokio::select! {
                _ = tokio::signal::ctrl_c() => {}
                r = fail_rx => match r {
                    Ok(msg) => *failed_set.lock().unwrap_or_else(|e| e.into_inner()) = Some(msg),
                    Err(_) => std::future::pending::<()>().await,
                },
            }
        };
        axum::serve(listener, router_with_ui(app, a.ui.as_deref()))
            .with_graceful_shutdown(shutdown)
            .await
            .map_err(|e| CliError::Data(format!("server: {e}")))?;
        let msg = failed.lock().unwrap_or_else(|e| e.into_inner()).take();
        msg.map_or(Ok(()), |m| Err(CliError::Data(m)))
    })
}
