//! HTTP JSON API: datasets under a data directory, per-session detection,
//! grid layouts with zoomable hierarchies, and job polling for long requests.
//!
//! Sessions live in memory. Mutating requests on one session (detect, layout,
//! zoom) are serialized; reads only take a short snapshot lock.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::Mutex;
use tower_http::cors::CorsLayer;

use crate::dataset::{self, Artifact, Dataset, DatasetManifest, Split};
use crate::analysis;
use crate::ensemble::{OoDScoreTable, ScoreRow};
use crate::error::Error;
use crate::geom::{distance, Point};
use crate::grid::{CellEntry, LayoutDocument, DEFAULT_K};
use crate::hierarchy::{Hierarchy, HierarchyConfig, HierarchyNode, Region, SampleInfo, DEFAULT_ALPHA, DEFAULT_MAX_SIDE};

pub const DEFAULT_PORT: u16 = 8780;

// ---------------------------------------------------------------------------
// errors

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    details: Vec<String>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
            details: Vec::new(),
        }
    }

    fn not_found(what: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, what)
    }

    fn bad_request(what: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, what)
    }

    fn conflict(what: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, what)
    }

    fn body(&self) -> Value {
        json!({ "error": self.message, "details": self.details })
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } | Error::Internal(_) | Error::Parse { .. } | Error::ManifestMismatch { .. } => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
            _ => StatusCode::BAD_REQUEST,
        };
        let details = match &e {
            Error::Validation(problems) => problems.clone(),
            _ => Vec::new(),
        };
        ApiError {
            status,
            message: e.to_string(),
            details,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body())).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    let raw: &[u8] = if body.iter().all(u8::is_ascii_whitespace) { b"{}" } else { body };
    serde_json::from_slice(raw).map_err(|e| ApiError {
        status: StatusCode::BAD_REQUEST,
        message: "invalid request body".into(),
        details: vec![e.to_string()],
    })
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> crate::Result<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::from(Error::Internal(format!("worker failed: {e}"))))?
        .map_err(ApiError::from)
}

// ---------------------------------------------------------------------------
// state

pub struct AppState {
    data_dir: PathBuf,
    /// Dataset name → manifest path.
    manifests: BTreeMap<String, PathBuf>,
    loaded: Mutex<HashMap<String, Arc<Dataset>>>,
    sessions: RwLock<HashMap<String, Arc<Session>>>,
    jobs: RwLock<HashMap<String, Job>>,
    next_session: AtomicU64,
    next_job: AtomicU64,
}

impl AppState {
    /// Indexes `manifest.json` in `data_dir` and in its direct subdirectories.
    /// Unreadable manifests are skipped with a warning.
    pub fn open(data_dir: &Path) -> crate::Result<AppState> {
        let entries = std::fs::read_dir(data_dir).map_err(|e| Error::io(data_dir, e))?;
        let mut candidates = vec![data_dir.join("manifest.json")];
        let mut subdirs: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_dir())
            .collect();
        subdirs.sort();
        candidates.extend(subdirs.into_iter().map(|d| d.join("manifest.json")));

        let mut manifests = BTreeMap::new();
        for path in candidates.into_iter().filter(|p| p.is_file()) {
            match DatasetManifest::read(&path) {
                Ok(m) => match manifests.entry(m.name) {
                    Entry::Occupied(e) => {
                        log::warn!("{}: dataset `{}` already registered, skipped", path.display(), e.key());
                    }
                    Entry::Vacant(e) => {
                        e.insert(path);
                    }
                },
                Err(e) => log::warn!("skipping {}: {e}", path.display()),
            }
        }
        Ok(AppState {
            data_dir: data_dir.to_path_buf(),
            manifests,
            loaded: Mutex::new(HashMap::new()),
            sessions: RwLock::new(HashMap::new()),
            jobs: RwLock::new(HashMap::new()),
            next_session: AtomicU64::new(1),
            next_job: AtomicU64::new(1),
        })
    }

    pub fn dataset_names(&self) -> Vec<String> {
        self.manifests.keys().cloned().collect()
    }

    async fn dataset(&self, name: &str) -> ApiResult<Arc<Dataset>> {
        let path = self
            .manifests
            .get(name)
            .ok_or_else(|| ApiError::not_found(format!("unknown dataset `{name}`")))?
            .clone();
        let mut loaded = self.loaded.lock().await;
        if let Some(ds) = loaded.get(name) {
            return Ok(ds.clone());
        }
        let ds = Arc::new(blocking(move || dataset::load_dataset(&path)).await?);
        loaded.insert(name.to_string(), ds.clone());
        Ok(ds)
    }

    fn session(&self, id: &str) -> ApiResult<Arc<Session>> {
        self.sessions
            .read()
            .expect("session table poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("unknown session `{id}`")))
    }
}

pub type SharedState = Arc<AppState>;

struct Session {
    id: String,
    dataset: Arc<Dataset>,
    /// Serializes mutating operations.
    ops: Mutex<()>,
    data: RwLock<SessionData>,
}

#[derive(Default)]
struct SessionData {
    scores: Option<Arc<OoDScoreTable>>,
    /// 2D coordinates for every sample, keyed by projection seed.
    coords: HashMap<u64, Arc<Vec<Point>>>,
    layouts: BTreeMap<String, StoredLayout>,
}

struct StoredLayout {
    split: SplitSelection,
    hierarchy: Hierarchy,
    document: LayoutDocument,
}

impl Session {
    fn read(&self) -> std::sync::RwLockReadGuard<'_, SessionData> {
        self.data.read().expect("session poisoned")
    }

    fn write(&self) -> std::sync::RwLockWriteGuard<'_, SessionData> {
        self.data.write().expect("session poisoned")
    }

    fn scores(&self) -> ApiResult<Arc<OoDScoreTable>> {
        self.read()
            .scores
            .clone()
            .ok_or_else(|| ApiError::conflict("detection has not been run for this session"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum JobStatus {
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, Serialize)]
struct Job {
    job_id: String,
    kind: &'static str,
    session_id: String,
    status: JobStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    result: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<Value>,
}

/// Runs `work` now, or as a background job when `run_async` is set.
async fn maybe_job<F, Fut>(
    state: SharedState,
    session_id: String,
    kind: &'static str,
    run_async: bool,
    work: F,
) -> ApiResult<Response>
where
    F: FnOnce() -> Fut + Send + 'static,
    Fut: std::future::Future<Output = ApiResult<Value>> + Send + 'static,
{
    if !run_async {
        return Ok(Json(work().await?).into_response());
    }
    let job_id = format!("j{}", state.next_job.fetch_add(1, Ordering::Relaxed));
    let job = Job {
        job_id: job_id.clone(),
        kind,
        session_id,
        status: JobStatus::Running,
        result: None,
        error: None,
    };
    state.jobs.write().expect("job table poisoned").insert(job_id.clone(), job.clone());
    let st = state.clone();
    let id = job_id.clone();
    tokio::spawn(async move {
        let outcome = work().await;
        let mut jobs = st.jobs.write().expect("job table poisoned");
        if let Some(j) = jobs.get_mut(&id) {
            match outcome {
                Ok(v) => {
                    j.status = JobStatus::Done;
                    j.result = Some(v);
                }
                Err(e) => {
                    j.status = JobStatus::Failed;
                    j.error = Some(e.body());
                }
            }
        }
    });
    Ok((StatusCode::ACCEPTED, Json(serde_json::to_value(&job).expect("job serializes"))).into_response())
}

// ---------------------------------------------------------------------------
// routes

pub fn router(state: SharedState) -> Router {
    Router::new()
        .route("/api/datasets", get(list_datasets))
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}/detect", post(detect))
        .route("/api/sessions/{id}/scores", get(scores))
        .route("/api/sessions/{id}/layout", post(layout))
        .route("/api/sessions/{id}/layouts/{layout_id}", get(get_layout))
        .route("/api/sessions/{id}/layouts/{layout_id}/zoom", post(zoom))
        .route("/api/sessions/{id}/layouts/{layout_id}/hierarchy", get(get_hierarchy))
        .route("/api/sessions/{id}/samples/{sample_id}/neighbors", get(neighbors))
        .route("/api/sessions/{id}/persist", post(persist))
        .route("/api/jobs/{job_id}", get(get_job))
        .route("/api/samples/{dataset}/{sample_id}/image", get(sample_image))
        .route("/api/samples/{dataset}/{sample_id}/saliency", get(sample_saliency))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

/// Binds `127.0.0.1:port` and serves until the process is stopped.
pub async fn serve(data_dir: &Path, port: u16) -> crate::Result<()> {
    let state = Arc::new(AppState::open(data_dir)?);
    log::info!("{} dataset(s) under {}", state.manifests.len(), data_dir.display());
    let addr = SocketAddr::from(([127, 0, 0, 1], port));
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| Error::Internal(format!("cannot bind {addr}: {e}")))?;
    log::info!("listening on http://{addr}");
    axum::serve(listener, router(state))
        .await
        .map_err(|e| Error::Internal(format!("server stopped: {e}")))
}

#[derive(Serialize)]
struct DatasetSummary {
    name: String,
    n_samples: usize,
    classes: Vec<String>,
    feature_sets: Vec<FeatureSetSummary>,
    has_images: bool,
    has_saliency: bool,
    has_ood_truth: bool,
    has_precomputed_2d: bool,
}

#[derive(Serialize)]
struct FeatureSetSummary {
    name: String,
    dim: usize,
}

async fn list_datasets(State(state): State<SharedState>) -> ApiResult<Json<Vec<DatasetSummary>>> {
    let mut out = Vec::new();
    for path in state.manifests.values() {
        let m = DatasetManifest::read(path)?;
        out.push(DatasetSummary {
            n_samples: m.n_samples,
            feature_sets: m
                .feature_sets
                .iter()
                .map(|f| FeatureSetSummary {
                    name: f.name.clone(),
                    dim: f.dim,
                })
                .collect(),
            has_images: m.image_dir.is_some(),
            has_saliency: m.saliency_dir.is_some(),
            has_ood_truth: m.ood_truth_path.is_some(),
            has_precomputed_2d: m.precomputed_2d_path.is_some(),
            classes: m.classes,
            name: m.name,
        });
    }
    Ok(Json(out))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    dataset: String,
}

async fn create_session(State(state): State<SharedState>, body: Bytes) -> ApiResult<Response> {
    let req: CreateSession = parse_body(&body)?;
    let ds = state.dataset(&req.dataset).await?;
    let id = format!("s{}", state.next_session.fetch_add(1, Ordering::Relaxed));
    let session = Arc::new(Session {
        id: id.clone(),
        dataset: ds.clone(),
        ops: Mutex::new(()),
        data: RwLock::new(SessionData::default()),
    });
    state.sessions.write().expect("session table poisoned").insert(id.clone(), session);
    let body = json!({
        "session_id": id,
        "dataset": ds.name(),
        "n_samples": ds.n_samples(),
        "n_train": ds.ids_in(Split::Train).len(),
        "n_test": ds.ids_in(Split::Test).len(),
        "classes": ds.manifest.classes,
    });
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

// ---------------------------------------------------------------------------
// detection

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct DetectRequest {
    n_models: usize,
    #[serde(default)]
    feature_sets: Option<Vec<String>>,
    #[serde(default, rename = "async")]
    run_async: bool,
}

async fn detect(
    State(state): State<SharedState>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> ApiResult<Response> {
    let req: DetectRequest = parse_body(&body)?;
    let session = state.session(&id)?;
    let run_async = req.run_async;
    maybe_job(state, id, "detect", run_async, move || async move {
        let _op = session.ops.lock().await;
        let ds = session.dataset.clone();
        let (table, summary) =
            blocking(move || analysis::run_detection(&ds, req.n_models, req.feature_sets.as_deref())).await?;
        let mut data = session.write();
        data.scores = Some(Arc::new(table));
        // cached layouts carry stale OoD colors and sampling
        data.layouts.clear();
        Ok(json!({ "session_id": session.id, "summary": summary }))
    })
    .await
}

#[derive(Deserialize)]
struct ScoresQuery {
    split: Option<String>,
    categories: Option<String>,
}

#[derive(Serialize)]
struct ScoreEntry<'a> {
    #[serde(flatten)]
    row: &'a ScoreRow,
    split: Split,
    class: usize,
}

async fn scores(
    State(state): State<SharedState>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<ScoresQuery>,
) -> ApiResult<Response> {
    let session = state.session(&id)?;
    let table = session.scores()?;
    let ds = &session.dataset;
    let split: Option<Split> = match q.split.as_deref() {
        None | Some("") | Some("both") => None,
        Some(s) => Some(s.parse().map_err(|_| ApiError::bad_request(format!("invalid split `{s}`")))?),
    };
    let categories = match q.categories.as_deref() {
        None | Some("") => None,
        Some(list) => Some(parse_categories(ds, &list.split(',').map(str::to_string).collect::<Vec<_>>())?),
    };
    let rows: Vec<ScoreEntry> = table
        .rows
        .iter()
        .filter(|r| split.is_none_or(|s| ds.splits[r.sample_id] == s))
        .filter(|r| categories.as_ref().is_none_or(|c| c.contains(&ds.labels[r.sample_id])))
        .map(|r| ScoreEntry {
            row: r,
            split: ds.splits[r.sample_id],
            class: ds.labels[r.sample_id],
        })
        .collect();
    Ok(Json(json!({ "n_classes": table.n_classes, "rows": rows })).into_response())
}

/// Class names, or class indices written as decimal numbers.
fn parse_categories(ds: &Dataset, names: &[String]) -> ApiResult<Vec<usize>> {
    let mut out = Vec::with_capacity(names.len());
    let mut unknown = Vec::new();
    for n in names {
        let n = n.trim();
        match ds.class_index(n).or_else(|| n.parse().ok().filter(|&i: &usize| i < ds.n_classes())) {
            Some(c) => out.push(c),
            None => unknown.push(format!("unknown category `{n}`")),
        }
    }
    if !unknown.is_empty() {
        return Err(ApiError {
            status: StatusCode::BAD_REQUEST,
            message: "invalid categories".into(),
            details: unknown,
        });
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

// ---------------------------------------------------------------------------
// layout

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
enum SplitSelection {
    Train,
    Test,
    #[default]
    Both,
}

impl SplitSelection {
    fn admits(self, s: Split) -> bool {
        match self {
            SplitSelection::Train => s == Split::Train,
            SplitSelection::Test => s == Split::Test,
            SplitSelection::Both => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
enum LayoutMode {
    #[default]
    Single,
    Juxtapose,
    Superpose,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayoutRequest {
    #[serde(default)]
    split: SplitSelection,
    #[serde(default)]
    categories: Option<Vec<String>>,
    #[serde(default = "default_k")]
    k: usize,
    #[serde(default)]
    mode: LayoutMode,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_max_side")]
    max_side: usize,
    #[serde(default, rename = "async", skip_serializing)]
    run_async: bool,
}

fn default_k() -> usize {
    DEFAULT_K
}

fn default_max_side() -> usize {
    DEFAULT_MAX_SIDE
}

#[derive(Serialize)]
struct LayoutEntry<'a> {
    layout_id: &'a str,
    split: SplitSelection,
    document: &'a LayoutDocument,
}

/// 64-bit FNV-1a, as 16 hex digits.
fn fnv1a_hex(bytes: &[u8]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    format!("{h:016x}")
}

async fn session_coords(session: &Session, seed: u64) -> ApiResult<Arc<Vec<Point>>> {
    // the stored projection does not depend on the seed
    let key = if session.dataset.precomputed_2d.is_some() { 0 } else { seed };
    if let Some(c) = session.read().coords.get(&key) {
        return Ok(c.clone());
    }
    let ds = session.dataset.clone();
    let coords = Arc::new(blocking(move || analysis::project(&ds, seed)).await?);
    session.write().coords.insert(key, coords.clone());
    Ok(coords)
}

fn node_document(node: &HierarchyNode, ds: &Dataset, scores: Option<&OoDScoreTable>) -> LayoutDocument {
    LayoutDocument {
        grid: node.grid,
        cells: node
            .cells
            .iter()
            .enumerate()
            .map(|(cell, s)| CellEntry {
                cell,
                sample_id: *s,
                split: s.map(|id| ds.splits[id]),
                class: s.map(|id| ds.labels[id]),
                ood_norm: s.and_then(|id| scores.map(|t| t.rows[id].ood_score_normalized)),
            })
            .collect(),
        total_cost: node.total_cost,
        k: node.k,
        cr: None,
        timings: None,
    }
}

fn build_layout(
    ds: &Dataset,
    scores: Option<&OoDScoreTable>,
    coords: &[Point],
    split: SplitSelection,
    categories: Option<&[usize]>,
    req: &LayoutRequest,
) -> crate::Result<(Hierarchy, LayoutDocument)> {
    let samples: Vec<SampleInfo> = (0..ds.n_samples())
        .filter(|&i| split.admits(ds.splits[i]))
        .filter(|&i| categories.is_none_or(|c| c.contains(&ds.labels[i])))
        .map(|i| SampleInfo {
            id: i,
            pos: coords[i],
            ood_norm: scores.map_or(0.0, |t| t.rows[i].ood_score_normalized),
            class: ds.labels[i],
        })
        .collect();
    if samples.is_empty() {
        return Err(Error::EmptySelection(format!("no {split:?} samples match the request").to_lowercase()));
    }
    let hierarchy = Hierarchy::new(
        samples,
        HierarchyConfig {
            max_side: req.max_side,
            alpha: DEFAULT_ALPHA,
            k: req.k,
            seed: req.seed,
        },
    )?;
    let document = node_document(hierarchy.root(), ds, scores);
    Ok((hierarchy, document))
}

async fn layout(
    State(state): State<SharedState>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> ApiResult<Response> {
    let req: LayoutRequest = parse_body(&body)?;
    if req.k == 0 {
        return Err(ApiError::bad_request("k must be at least 1"));
    }
    if req.max_side == 0 {
        return Err(ApiError::bad_request("max_side must be at least 1"));
    }
    let splits = match (req.mode, req.split) {
        (LayoutMode::Juxtapose, SplitSelection::Both) => vec![SplitSelection::Train, SplitSelection::Test],
        (LayoutMode::Juxtapose, _) => {
            return Err(ApiError::bad_request("juxtapose compares both splits; omit split or use \"both\""));
        }
        (LayoutMode::Superpose, SplitSelection::Both) => vec![SplitSelection::Both],
        (LayoutMode::Superpose, _) => {
            return Err(ApiError::bad_request("superpose merges both splits; omit split or use \"both\""));
        }
        (LayoutMode::Single, s) => vec![s],
    };
    let session = state.session(&id)?;
    let categories = req.categories.as_deref().map(|c| parse_categories(&session.dataset, c)).transpose()?;
    let run_async = req.run_async;
    maybe_job(state, id, "layout", run_async, move || async move {
        let _op = session.ops.lock().await;
        let coords = session_coords(&session, req.seed).await?;
        let scores = session.read().scores.clone();
        let ds = session.dataset.clone();
        let canonical = serde_json::to_vec(&(ds.name(), &req, &categories)).expect("request serializes");
        let (r, c) = (req.clone(), categories.clone());
        let built = blocking(move || {
            splits
                .into_iter()
                .map(|s| {
                    let (h, d) = build_layout(&ds, scores.as_deref(), &coords, s, c.as_deref(), &r)?;
                    Ok((s, h, d))
                })
                .collect::<crate::Result<Vec<_>>>()
        })
        .await?;

        let mut data = session.write();
        let mut layouts = Vec::with_capacity(built.len());
        for (split, hierarchy, document) in built {
            let mut key = canonical.clone();
            key.extend_from_slice(format!("/{split:?}").as_bytes());
            let layout_id = fnv1a_hex(&key);
            layouts.push(json!(LayoutEntry {
                layout_id: &layout_id,
                split,
                document: &document,
            }));
            data.layouts.insert(
                layout_id,
                StoredLayout {
                    split,
                    hierarchy,
                    document,
                },
            );
        }
        Ok(json!({ "mode": req.mode, "layouts": layouts }))
    })
    .await
}

async fn get_layout(
    State(state): State<SharedState>,
    UrlPath((id, layout_id)): UrlPath<(String, String)>,
) -> ApiResult<Response> {
    let session = state.session(&id)?;
    let data = session.read();
    let l = data
        .layouts
        .get(&layout_id)
        .ok_or_else(|| ApiError::not_found(format!("unknown layout `{layout_id}`")))?;
    Ok(Json(json!(LayoutEntry {
        layout_id: &layout_id,
        split: l.split,
        document: &l.document,
    }))
    .into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ZoomRequest {
    #[serde(default)]
    node_id: usize,
    region: Region,
}

async fn zoom(
    State(state): State<SharedState>,
    UrlPath((id, layout_id)): UrlPath<(String, String)>,
    body: Bytes,
) -> ApiResult<Response> {
    let req: ZoomRequest = parse_body(&body)?;
    let session = state.session(&id)?;
    let _op = session.ops.lock().await;
    let scores = session.read().scores.clone();
    let mut data = session.write();
    let l = data
        .layouts
        .get_mut(&layout_id)
        .ok_or_else(|| ApiError::not_found(format!("unknown layout `{layout_id}`")))?;
    if l.hierarchy.node(req.node_id).is_none() {
        return Err(ApiError::not_found(format!("unknown hierarchy node {}", req.node_id)));
    }
    let node = l.hierarchy.zoom(req.node_id, req.region)?;
    let document = node_document(node, &session.dataset, scores.as_deref());
    Ok(Json(json!({ "layout_id": layout_id, "node": node, "document": document })).into_response())
}

async fn get_hierarchy(
    State(state): State<SharedState>,
    UrlPath((id, layout_id)): UrlPath<(String, String)>,
) -> ApiResult<Response> {
    let session = state.session(&id)?;
    let data = session.read();
    let l = data
        .layouts
        .get(&layout_id)
        .ok_or_else(|| ApiError::not_found(format!("unknown layout `{layout_id}`")))?;
    Ok(Json(l.hierarchy.to_document()).into_response())
}

#[derive(Deserialize)]
struct NeighborsQuery {
    n: Option<usize>,
    seed: Option<u64>,
}

/// Nearest training samples to a sample in the 2D projection.
async fn neighbors(
    State(state): State<SharedState>,
    UrlPath((id, sample_id)): UrlPath<(String, usize)>,
    Query(q): Query<NeighborsQuery>,
) -> ApiResult<Response> {
    let session = state.session(&id)?;
    let ds = &session.dataset;
    if sample_id >= ds.n_samples() {
        return Err(ApiError::not_found(format!("unknown sample {sample_id}")));
    }
    let n = q.n.unwrap_or(5);
    let coords = session_coords(&session, q.seed.unwrap_or(0)).await?;
    let p = coords[sample_id];
    let mut near: Vec<(f64, usize)> = ds
        .ids_in(Split::Train)
        .into_iter()
        .filter(|&i| i != sample_id)
        .map(|i| (distance(p, coords[i]), i))
        .collect();
    near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    near.truncate(n);
    let list: Vec<Value> = near
        .iter()
        .map(|&(d, i)| json!({ "sample_id": i, "distance": d, "class": ds.labels[i] }))
        .collect();
    Ok(Json(json!({ "sample_id": sample_id, "neighbors": list })).into_response())
}

/// Writes scores and every layout with its hierarchy under
/// `<data_dir>/results/<dataset>/<session>-<layout>/`.
async fn persist(State(state): State<SharedState>, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    let session = state.session(&id)?;
    let _op = session.ops.lock().await;
    let root = state.data_dir.join("results");
    let data = session.read();
    let name = session.dataset.name();
    let mut written = Vec::new();
    if let Some(t) = &data.scores {
        written.push(dataset::persist(&root, name, &session.id, Artifact::Scores(&t.rows))?);
    }
    for (lid, l) in &data.layouts {
        let run = format!("{}-{lid}", session.id);
        written.push(dataset::persist(&root, name, &run, Artifact::Layout(&l.document))?);
        let doc = l.hierarchy.to_document();
        written.push(dataset::persist(&root, name, &run, Artifact::Hierarchy(&doc))?);
    }
    Ok(Json(json!({ "written": written })).into_response())
}

async fn get_job(State(state): State<SharedState>, UrlPath(job_id): UrlPath<String>) -> ApiResult<Response> {
    let jobs = state.jobs.read().expect("job table poisoned");
    let job = jobs
        .get(&job_id)
        .ok_or_else(|| ApiError::not_found(format!("unknown job `{job_id}`")))?;
    Ok(Json(job).into_response())
}

// ---------------------------------------------------------------------------
// static images

async fn sample_file(state: &AppState, name: &str, sample_id: &str, saliency: bool) -> ApiResult<Response> {
    let manifest_path = state
        .manifests
        .get(name)
        .ok_or_else(|| ApiError::not_found(format!("unknown dataset `{name}`")))?;
    let m = DatasetManifest::read(manifest_path)?;
    let id: usize = sample_id
        .parse()
        .ok()
        .filter(|&i| i < m.n_samples)
        .ok_or_else(|| ApiError::not_found(format!("unknown sample `{sample_id}`")))?;
    let dir = if saliency { &m.saliency_dir } else { &m.image_dir };
    let what = if saliency { "saliency maps" } else { "images" };
    let dir = dir
        .as_ref()
        .ok_or_else(|| ApiError::not_found(format!("dataset `{name}` has no {what}")))?;
    let root = manifest_path.parent().unwrap_or(Path::new("."));
    let path = root.join(dir).join(format!("{id}.png"));
    let bytes = tokio::fs::read(&path)
        .await
        .map_err(|_| ApiError::not_found(format!("no file for sample {id}")))?;
    Ok(([(header::CONTENT_TYPE, "image/png")], bytes).into_response())
}

async fn sample_image(
    State(state): State<SharedState>,
    UrlPath((name, sample_id)): UrlPath<(String, String)>,
) -> ApiResult<Response> {
    sample_file(&state, &name, &sample_id, false).await
}

async fn sample_saliency(
    State(state): State<SharedState>,
    UrlPath((name, sample_id)): UrlPath<(String, String)>,
) -> ApiResult<Response> {
    sample_file(&state, &name, &sample_id, true).await
}
