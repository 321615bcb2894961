//! HTTP JSON API over analysis sessions.
//!
//! | method | path | |
//! |---|---|---|
//! | POST | `/sessions` | open a session from source text |
//! | GET | `/sessions/{id}` | graph, factor catalogue, unresolved keys |
//! | DELETE | `/sessions/{id}` | close a session |
//! | GET | `/sessions/{id}/cost?month=M&vendor=V` | cost report |
//! | PATCH | `/sessions/{id}/assumptions` | set assumption values |
//! | POST | `/sessions/{id}/black-box-link` | link an external call to an endpoint |
//! | GET | `/sessions/{id}/source` | text and annotations |
//! | GET | `/sessions/{id}/graph?format=json\|dot` | graph export |
//! | GET | `/sessions/{id}/compare?month=M` | every catalog side by side |
//! | GET | `/catalogs` | loaded catalogs |
//!
//! Session responses carry the session version in the `x-source-version`
//! header; cost reports are byte-identical to `penny cost --json`.

mod error;
mod session;

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::{Mutex, RwLock};
use tower_http::cors::CorsLayer;

use penny_core::pricing::{bundled_catalogs, load_catalog, CatalogError, PricingCatalog};
use penny_core::scalar::Scalar;

pub use error::ApiError;
pub use session::{Session, SessionRecord};

pub const VERSION_HEADER: &str = "x-source-version";

#[derive(Debug, Clone, Default)]
pub struct ServiceConfig {
    pub listen: String,
    /// Catalog files (`*.json`); the bundled catalogs when unset.
    pub catalog_dir: Option<PathBuf>,
    /// Origin allowed by CORS.
    pub ui_origin: Option<String>,
    /// Sessions are restored from and saved to this file.
    pub snapshot: Option<PathBuf>,
}

pub struct AppState {
    pub catalogs: Vec<(String, PricingCatalog)>,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
}

impl AppState {
    pub fn new(catalogs: Vec<(String, PricingCatalog)>) -> Self {
        AppState { catalogs, sessions: RwLock::new(HashMap::new()) }
    }

    async fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.sessions
            .read()
            .await
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("UnknownSession", format!("no session `{id}`")))
    }

    fn resolve_catalogs(&self, ids: Option<&[String]>) -> Result<Vec<(String, PricingCatalog)>, ApiError> {
        match ids {
            None => Ok(self.catalogs.clone()),
            Some(ids) => ids
                .iter()
                .map(|id| {
                    self.catalogs
                        .iter()
                        .find(|(cid, c)| cid == id || c.vendor_id == *id)
                        .cloned()
                        .ok_or_else(|| ApiError::not_found("UnknownCatalog", format!("no catalog `{id}`")).with("catalog", id))
                })
                .collect(),
        }
    }

    /// Every session in a form that can be restored.
    pub async fn snapshot(&self) -> Vec<SessionRecord> {
        let sessions: Vec<_> = self.sessions.read().await.values().cloned().collect();
        let mut records = Vec::new();
        for s in sessions {
            records.push(s.lock().await.record());
        }
        records.sort_by(|a, b| a.id.cmp(&b.id));
        records
    }

    /// Reopens recorded sessions; ones that no longer analyze are skipped
    /// and returned with their errors.
    pub async fn restore(&self, records: Vec<SessionRecord>) -> Vec<(String, ApiError)> {
        let mut failed = Vec::new();
        for r in records {
            let opened = self
                .resolve_catalogs(Some(&r.catalogs))
                .and_then(|catalogs| Session::open(r.id.clone(), r.text, r.path, catalogs, r.overrides));
            match opened {
                Ok(mut s) => {
                    s.version = r.version;
                    self.sessions.write().await.insert(r.id, Arc::new(Mutex::new(s)));
                }
                Err(e) => failed.push((r.id, e)),
            }
        }
        failed
    }
}

/// Catalogs from `*.json` files in `dir`, keyed by file stem, in name order.
pub fn load_catalog_dir(dir: &Path) -> Result<Vec<(String, PricingCatalog)>, CatalogError> {
    let io = |e: std::io::Error| CatalogError::Io { path: dir.display().to_string(), message: e.to_string() };
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let id = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            load_catalog(&p).map(|c| (id, c))
        })
        .collect()
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/catalogs", get(list_catalogs))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session).delete(delete_session))
        .route("/sessions/{id}/cost", get(get_cost))
        .route("/sessions/{id}/assumptions", patch(patch_assumptions))
        .route("/sessions/{id}/black-box-link", post(link_call))
        .route("/sessions/{id}/source", get(get_source))
        .route("/sessions/{id}/graph", get(get_graph))
        .route("/sessions/{id}/compare", get(get_compare))
        .with_state(state)
}

/// Adds CORS for a single UI origin.
pub fn with_cors(router: Router, origin: &str) -> Result<Router, String> {
    let origin = HeaderValue::from_str(origin).map_err(|e| format!("bad --ui-origin: {e}"))?;
    Ok(router.layer(
        CorsLayer::new()
            .allow_origin(origin)
            .allow_methods([Method::GET, Method::POST, Method::PATCH, Method::DELETE])
            .allow_headers([header::CONTENT_TYPE])
            .expose_headers([header::HeaderName::from_static(VERSION_HEADER)]),
    ))
}

fn versioned(version: u64, status: StatusCode, body: Value) -> Response {
    let mut response = (status, Json(body)).into_response();
    response.headers_mut().insert(VERSION_HEADER, HeaderValue::from(version));
    response
}

fn parse_month(params: &HashMap<String, String>) -> Result<u32, ApiError> {
    match params.get("month") {
        None => Ok(1),
        Some(text) => match text.parse::<u32>() {
            Ok(m) if m >= 1 => Ok(m),
            _ => Err(ApiError::bad_request("InvalidMonth", format!("month must be an integer ≥ 1, got `{text}`"))),
        },
    }
}

async fn list_catalogs(State(state): State<Arc<AppState>>) -> Json<Value> {
    let rows: Vec<Value> = state
        .catalogs
        .iter()
        .map(|(id, c)| json!({ "id": id, "vendor_id": c.vendor_id, "version": c.version, "rules": c.rules.len() }))
        .collect();
    Json(json!({ "catalogs": rows }))
}

#[derive(Debug, Deserialize)]
struct CreateSession {
    source: String,
    #[serde(default)]
    catalogs: Option<Vec<String>>,
    /// File to write persisted annotations through to.
    #[serde(default)]
    path: Option<PathBuf>,
    #[serde(default)]
    assumptions: BTreeMap<String, Scalar>,
}

async fn create_session(State(state): State<Arc<AppState>>, body: Result<Json<CreateSession>, axum::extract::rejection::JsonRejection>) -> Result<Response, ApiError> {
    let Json(body) = body.map_err(|e| ApiError::bad_request("InvalidBody", e.body_text()))?;
    let catalogs = state.resolve_catalogs(body.catalogs.as_deref())?;
    let id = uuid::Uuid::new_v4().simple().to_string();
    let session = Session::open(id.clone(), body.source, body.path, catalogs, body.assumptions)?;
    let response = versioned(session.version, StatusCode::CREATED, session.summary());
    state.sessions.write().await.insert(id, Arc::new(Mutex::new(session)));
    Ok(response)
}

async fn get_session(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let session = state.session(&id).await?;
    let s = session.lock().await;
    Ok(versioned(s.version, StatusCode::OK, s.summary()))
}

async fn delete_session(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<StatusCode, ApiError> {
    match state.sessions.write().await.remove(&id) {
        Some(_) => Ok(StatusCode::NO_CONTENT),
        None => Err(ApiError::not_found("UnknownSession", format!("no session `{id}`"))),
    }
}

async fn get_cost(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(params): Query<HashMap<String, String>>,
) -> Result<Response, ApiError> {
    let session = state.session(&id).await?;
    let month = parse_month(&params)?;
    let s = session.lock().await;
    let report = s.cost(month, params.get("vendor").map(String::as_str))?;
    let mut response = ([(header::CONTENT_TYPE, "application/json")], report.to_json()).into_response();
    response.headers_mut().insert(VERSION_HEADER, HeaderValue::from(s.version));
    Ok(response)
}

async fn patch_assumptions(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<BTreeMap<String, Value>>, axum::extract::rejection::JsonRejection>,
) -> Result<Response, ApiError> {
    let Json(mut body) = body.map_err(|e| ApiError::bad_request("InvalidBody", e.body_text()))?;
    let persist = match body.remove("persist") {
        None => false,
        Some(Value::Bool(b)) => b,
        Some(_) => return Err(ApiError::bad_request("InvalidBody", "`persist` must be a boolean")),
    };
    let month = match body.remove("month") {
        None => 1,
        Some(v) => v.as_u64().filter(|m| *m >= 1 && *m <= u32::MAX as u64).ok_or_else(|| ApiError::bad_request("InvalidMonth", "month must be an integer ≥ 1"))? as u32,
    };
    let session = state.session(&id).await?;
    let mut s = session.lock().await;
    s.patch(&body, persist)?;
    let mut out = s.summary();
    out["totals"] = s.totals(month);
    Ok(versioned(s.version, StatusCode::OK, out))
}

#[derive(Debug, Deserialize)]
struct LinkBody {
    node: String,
    route: String,
    #[serde(default)]
    persist: bool,
}

async fn link_call(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<LinkBody>, axum::extract::rejection::JsonRejection>,
) -> Result<Response, ApiError> {
    let Json(body) = body.map_err(|e| ApiError::bad_request("InvalidBody", e.body_text()))?;
    let session = state.session(&id).await?;
    let mut s = session.lock().await;
    s.link(&body.node, &body.route, body.persist)?;
    Ok(versioned(s.version, StatusCode::OK, s.summary()))
}

async fn get_source(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let session = state.session(&id).await?;
    let s = session.lock().await;
    Ok(versioned(s.version, StatusCode::OK, s.source_view()?))
}

async fn get_graph(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(params): Query<HashMap<String, String>>,
) -> Result<Response, ApiError> {
    let session = state.session(&id).await?;
    let s = session.lock().await;
    let mut response = match params.get("format").map(String::as_str) {
        None | Some("json") => Json(s.graph_json()).into_response(),
        Some("dot") => ([(header::CONTENT_TYPE, "text/vnd.graphviz")], s.graph_dot()).into_response(),
        Some(other) => return Err(ApiError::bad_request("InvalidFormat", format!("unknown format `{other}`; use json or dot"))),
    };
    response.headers_mut().insert(VERSION_HEADER, HeaderValue::from(s.version));
    Ok(response)
}

async fn get_compare(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(params): Query<HashMap<String, String>>,
) -> Result<Response, ApiError> {
    let session = state.session(&id).await?;
    let month = parse_month(&params)?;
    let s = session.lock().await;
    let comparison = s.compare(month)?;
    Ok(versioned(s.version, StatusCode::OK, serde_json::to_value(comparison).expect("comparisons serialize")))
}

/// Loads catalogs and restores the snapshot, if any.
pub async fn build_state(config: &ServiceConfig) -> Result<Arc<AppState>, String> {
    let catalogs = match &config.catalog_dir {
        Some(dir) => load_catalog_dir(dir).map_err(|e| e.to_string())?,
        None => bundled_catalogs(),
    };
    let state = Arc::new(AppState::new(catalogs));
    if let Some(path) = config.snapshot.as_ref().filter(|p| p.exists()) {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let records: Vec<SessionRecord> = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        for (id, e) in state.restore(records).await {
            eprintln!("snapshot: dropped session {id}: {}", e.body["message"]);
        }
    }
    Ok(state)
}

/// Serves until interrupted, then writes the snapshot if configured.
/// `ready` receives the bound address.
pub async fn serve(config: ServiceConfig, ready: impl FnOnce(SocketAddr)) -> Result<(), String> {
    let state = build_state(&config).await?;
    let mut app = router(state.clone());
    if let Some(origin) = &config.ui_origin {
        app = with_cors(app, origin)?;
    }
    let listener = tokio::net::TcpListener::bind(&config.listen).await.map_err(|e| format!("{}: {e}", config.listen))?;
    let addr = listener.local_addr().map_err(|e| e.to_string())?;
    ready(addr);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| e.to_string())?;
    if let Some(path) = &config.snapshot {
        let records = state.snapshot().await;
        let text = serde_json::to_string_pretty(&records).expect("records serialize");
        std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    Ok(())
}
