//! HTTP service for live post-editing sessions.
//!
//! One session per process: a corpus, its scheduler and the journal file.
//! Every accepted post-edit is appended (and synced) to the journal before
//! the response leaves, and a restart replays the journal, so an
//! acknowledged post-edit is never lost.
//!
//! Editors hold at most one task each. A task left unanswered for the lease
//! timeout returns to the queue; asking for a new task while holding one
//! hands the old one back.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use axum::extract::{DefaultBodyLimit, Multipart, Path as UrlPath, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use pedal_core::{Corpus, Error as EngineError, Featurizer, Scheduler, SegmentId, SegmentState, Task};
use serde::{Deserialize, Serialize};

use crate::config::ServiceConfig;
use crate::embeddings::read_embeddings;
use crate::error::{Error, IoContext, Result};
use crate::ingest::{ingest_path, ingest_reader, IngestOptions, Schema, SkippedRow};
use crate::journal::FileJournal;

/// Version tag carried by every JSON payload.
pub const SCHEMA_VERSION: &str = "1";

/// Uploaded corpora are kept here (inside the data directory) so a restart
/// can rebuild the session.
pub const UPLOADED_CORPUS: &str = "uploaded-corpus.tsv";
const UPLOADED_OPTIONS: &str = "uploaded-corpus.json";

const ANONYMOUS: &str = "anonymous";

/// Time source for lease expiry.
#[derive(Clone)]
pub enum Clock {
    System(Instant),
    /// Milliseconds advanced by hand; for tests.
    Manual(Arc<AtomicU64>),
}

impl Clock {
    pub fn system() -> Self {
        Clock::System(Instant::now())
    }

    fn elapsed(&self) -> Duration {
        match self {
            Clock::System(start) => start.elapsed(),
            Clock::Manual(ms) => Duration::from_millis(ms.load(Ordering::SeqCst)),
        }
    }
}

#[derive(Debug, Clone)]
struct Lease {
    task: Task,
    expires: Duration,
}

pub struct Session {
    scheduler: Scheduler,
    journal: FileJournal,
    leases: BTreeMap<String, Lease>,
    /// Set when a state change could not be journaled; the session refuses
    /// further writes until restarted from the journal.
    failed: Option<String>,
}

impl Session {
    /// Builds a session over `corpus` and replays whatever the journal at
    /// `journal_path` already holds.
    pub fn start(config: &ServiceConfig, corpus: &Corpus, journal_path: &Path) -> Result<Self> {
        let embeddings = config.embeddings.as_deref().map(read_embeddings).transpose()?;
        let featurizer = Featurizer::for_corpus(corpus, embeddings)?;
        let scheduler = Scheduler::new(corpus, &featurizer, config.scheduler.clone())?;
        Self::from_scheduler(scheduler, journal_path)
    }

    /// Wraps an already built scheduler (e.g. one with a preloaded model)
    /// and replays the journal into it.
    pub fn from_scheduler(mut scheduler: Scheduler, journal_path: &Path) -> Result<Self> {
        let (journal, events) = FileJournal::open(journal_path)?;
        scheduler
            .replay(&events)
            .map_err(|e| Error::Format(format!("journal {} does not fit the corpus: {e}", journal_path.display())))?;
        Ok(Session {
            scheduler,
            journal,
            leases: BTreeMap::new(),
            failed: None,
        })
    }

    pub fn scheduler(&self) -> &Scheduler {
        &self.scheduler
    }

    fn expire_leases(&mut self, now: Duration) {
        let expired: Vec<String> = self
            .leases
            .iter()
            .filter(|(_, l)| l.expires <= now)
            .map(|(e, _)| e.clone())
            .collect();
        for editor in expired {
            if let Some(lease) = self.leases.remove(&editor) {
                // only fails if the segment already left InProgress
                let _ = self.scheduler.release(lease.task.segment_id);
            }
        }
    }
}

struct Shared {
    config: ServiceConfig,
    clock: Clock,
    session: Mutex<Option<Session>>,
}

#[derive(Clone)]
pub struct AppState(Arc<Shared>);

impl AppState {
    /// Loads the configured corpus (or a previously uploaded one) and
    /// recovers from the journal. Without a corpus the service starts empty
    /// and waits for `POST /ingest`.
    pub fn new(config: ServiceConfig, clock: Clock) -> Result<Self> {
        config.validate()?;
        std::fs::create_dir_all(&config.data_dir).at(&config.data_dir)?;
        let uploaded = config.data_dir.join(UPLOADED_CORPUS);
        let source: Option<(PathBuf, IngestOptions)> = match &config.corpus {
            Some(path) => Some((path.clone(), config.ingest_options()?)),
            None if uploaded.exists() => {
                let opts_path = config.data_dir.join(UPLOADED_OPTIONS);
                let text = std::fs::read_to_string(&opts_path).at(&opts_path)?;
                let saved: UploadOptions = serde_json::from_str(&text).map_err(|e| Error::Format(e.to_string()))?;
                Some((uploaded, saved.into_options()?))
            }
            None => None,
        };
        let session = match source {
            Some((path, opts)) => {
                let ingested = ingest_path(&path, &opts)?;
                Some(Session::start(&config, &ingested.corpus, &config.journal_path())?)
            }
            None => None,
        };
        Ok(AppState(Arc::new(Shared {
            config,
            clock,
            session: Mutex::new(session),
        })))
    }

    /// State around a session built by the caller.
    pub fn with_session(config: ServiceConfig, clock: Clock, session: Option<Session>) -> Result<Self> {
        config.validate()?;
        Ok(AppState(Arc::new(Shared {
            config,
            clock,
            session: Mutex::new(session),
        })))
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.0.config
    }

    /// Locks the session. A poisoned lock means a handler panicked midway;
    /// the state is still the last fully applied transition.
    pub fn lock(&self) -> MutexGuard<'_, Option<Session>> {
        self.0.session.lock().unwrap_or_else(|p| p.into_inner())
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/queue/next", get(next_task))
        .route("/segments/{id}/postedit", post(post_edit))
        .route("/stats", get(stats))
        .route("/model/snapshot", get(snapshot))
        .route("/flags", get(flags))
        .route("/ingest", post(ingest))
        .layer(DefaultBodyLimit::max(256 * 1024 * 1024))
        .layer(middleware::from_fn_with_state(state.clone(), require_token))
        .with_state(state)
}

/// Binds, prints the bound address on stdout and serves until Ctrl-C.
pub async fn serve(state: AppState) -> Result<()> {
    let config = state.config();
    let addr = format!("{}:{}", config.host, config.port);
    let listener = tokio::net::TcpListener::bind(&addr)
        .await
        .map_err(|e| Error::Config(format!("cannot bind {addr}: {e}")))?;
    let local: SocketAddr = listener.local_addr().map_err(|e| Error::Config(e.to_string()))?;
    println!("pedal listening on {local}");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| Error::Config(format!("server error: {e}")))
}

// ---- payloads ----

#[derive(Debug, Serialize)]
pub struct ErrorBody {
    pub schema_version: &'static str,
    pub error: &'static str,
    pub message: String,
}

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

    fn no_session() -> Self {
        Self::new(StatusCode::SERVICE_UNAVAILABLE, "no_session", "no corpus loaded; POST /ingest first")
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let (status, code) = match e {
            EngineError::UnknownSegment(_) => (StatusCode::NOT_FOUND, "not_found"),
            EngineError::WrongState { .. } => (StatusCode::CONFLICT, "conflict"),
            _ => (StatusCode::BAD_REQUEST, "bad_request"),
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            schema_version: SCHEMA_VERSION,
            error: self.code,
            message: self.message,
        };
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = std::result::Result<Json<T>, ApiError>;

#[derive(Debug, Serialize)]
pub struct Health {
    pub schema_version: &'static str,
    pub status: &'static str,
    pub engine_version: &'static str,
    pub session: bool,
}

#[derive(Debug, Serialize)]
pub struct QueuePosition {
    /// Pending segments left after this one was served.
    pub remaining: usize,
    pub total: usize,
}

#[derive(Debug, Serialize)]
pub struct TaskView {
    pub segment_id: usize,
    pub hypothesis_index: usize,
    pub hypothesis_origin: String,
    pub source_text: String,
    pub source_lang: String,
    pub target_lang: String,
    pub hypothesis_text: String,
    pub predicted_ter: f64,
    /// Segment priority key (highest prediction over its hypotheses).
    pub priority: f64,
    pub warmup: bool,
    pub editor_id: String,
    pub lease_expires_in_secs: u64,
    pub queue: QueuePosition,
}

#[derive(Debug, Serialize)]
pub struct NextResponse {
    pub schema_version: &'static str,
    /// `task` or `drained`.
    pub status: &'static str,
    pub task: Option<TaskView>,
}

#[derive(Debug, Deserialize)]
pub struct NextQuery {
    pub editor_id: Option<String>,
}

#[derive(Debug, Deserialize)]
pub struct PostEditRequest {
    pub edited_text: String,
    pub editor_id: String,
}

#[derive(Debug, Serialize)]
pub struct FlagView {
    pub seq: u64,
    pub segment_id: usize,
    pub editor_id: String,
    pub blind_prediction: f64,
    pub realized_ter: f64,
    pub discrepancy: f64,
    pub threshold: f64,
}

impl From<&pedal_core::SanityFlag> for FlagView {
    fn from(f: &pedal_core::SanityFlag) -> Self {
        FlagView {
            seq: f.seq,
            segment_id: f.segment_id.0,
            editor_id: f.editor_id.clone(),
            blind_prediction: f.blind_prediction,
            realized_ter: f.realized_ter,
            discrepancy: f.discrepancy,
            threshold: f.threshold,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct PostEditResponse {
    pub schema_version: &'static str,
    pub seq: u64,
    pub segment_id: usize,
    pub hypothesis_index: usize,
    pub realized_ter: f64,
    pub blind_prediction: f64,
    pub discrepancy: f64,
    pub sanity_flag: Option<FlagView>,
    pub auto_closed: Vec<usize>,
    /// Pending segments after this post-edit.
    pub queue_size: usize,
    pub model_step: u64,
}

#[derive(Debug, Serialize)]
pub struct Counts {
    pub pending: usize,
    pub in_progress: usize,
    pub post_edited: usize,
    pub auto_closed: usize,
}

#[derive(Debug, Serialize)]
pub struct PrequentialView {
    pub samples: usize,
    pub mae: f64,
    pub mse: f64,
    pub spearman_rho: Option<f64>,
    pub pearson_r: Option<f64>,
    pub kendall_tau: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct StatsResponse {
    pub schema_version: &'static str,
    pub policy: &'static str,
    pub counts: Counts,
    pub total: usize,
    pub pct_post_edited: f64,
    /// Mean `100 * (1 - TER)` against references; absent without them.
    pub corpus_quality: Option<f64>,
    pub prequential: Option<PrequentialView>,
    pub model_step: u64,
    pub warmup_active: bool,
    pub rescores: u64,
    pub sanity_flags: usize,
    pub last_seq: u64,
}

#[derive(Debug, Serialize)]
pub struct FlagsResponse {
    pub schema_version: &'static str,
    pub flags: Vec<FlagView>,
}

#[derive(Debug, Serialize)]
pub struct IngestResponse {
    pub schema_version: &'static str,
    pub segments: usize,
    pub rows: usize,
    pub skipped: Vec<SkippedRow>,
    pub corpus_fingerprint: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct UploadOptions {
    schema: String,
    source_lang: String,
    target_lang: String,
    has_header: bool,
    skip_malformed: bool,
}

impl UploadOptions {
    fn into_options(self) -> Result<IngestOptions> {
        Ok(IngestOptions {
            schema: self.schema.parse::<Schema>()?,
            source_lang: self.source_lang,
            target_lang: self.target_lang,
            has_header: self.has_header,
            skip_malformed: self.skip_malformed,
        })
    }
}

// ---- handlers ----

async fn require_token(State(state): State<AppState>, req: Request, next: Next) -> Response {
    let Some(token) = state.config().api_token.as_deref() else {
        return next.run(req).await;
    };
    if req.uri().path() == "/health" {
        return next.run(req).await;
    }
    let presented = req
        .headers()
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "));
    if presented == Some(token) {
        next.run(req).await
    } else {
        ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or wrong bearer token").into_response()
    }
}

async fn health(State(state): State<AppState>) -> Json<Health> {
    Json(Health {
        schema_version: SCHEMA_VERSION,
        status: "ok",
        engine_version: pedal_core::ENGINE_VERSION,
        session: state.lock().is_some(),
    })
}

fn live_session<'a>(
    guard: &'a mut MutexGuard<'_, Option<Session>>,
    state: &AppState,
) -> std::result::Result<&'a mut Session, ApiError> {
    let session = guard.as_mut().ok_or_else(ApiError::no_session)?;
    if let Some(why) = &session.failed {
        return Err(ApiError::new(
            StatusCode::INTERNAL_SERVER_ERROR,
            "session_failed",
            format!("journal write failed ({why}); restart the service to recover"),
        ));
    }
    session.expire_leases(state.0.clock.elapsed());
    Ok(session)
}

fn task_view(session: &Session, task: &Task, editor: &str, expires_in: Duration) -> TaskView {
    let seg = &session.scheduler.segments()[task.segment_id.0];
    let hyp = &seg.hypotheses[task.hypothesis_index];
    TaskView {
        segment_id: task.segment_id.0,
        hypothesis_index: task.hypothesis_index,
        hypothesis_origin: hyp.origin.clone(),
        source_text: seg.source_text.clone(),
        source_lang: seg.source_lang.to_string(),
        target_lang: seg.target_lang.to_string(),
        hypothesis_text: hyp.text.clone(),
        predicted_ter: task.predicted_ter,
        priority: task.priority,
        warmup: task.warmup,
        editor_id: editor.to_string(),
        lease_expires_in_secs: expires_in.as_secs(),
        queue: QueuePosition {
            remaining: task.remaining,
            total: session.scheduler.segments().len(),
        },
    }
}

async fn next_task(State(state): State<AppState>, Query(q): Query<NextQuery>) -> ApiResult<NextResponse> {
    let editor = q.editor_id.filter(|e| !e.is_empty()).unwrap_or_else(|| ANONYMOUS.into());
    let mut guard = state.lock();
    let session = live_session(&mut guard, &state)?;
    let timeout = Duration::from_secs(state.config().lease_timeout_secs);
    let previous = session.leases.remove(&editor);
    let Some(task) = session.scheduler.next() else {
        if let Some(prev) = previous {
            session.leases.insert(editor, prev);
        }
        return Ok(Json(NextResponse {
            schema_version: SCHEMA_VERSION,
            status: "drained",
            task: None,
        }));
    };
    // the editor's earlier task goes back only after the new one is chosen
    if let Some(prev) = previous {
        session.scheduler.release(prev.task.segment_id)?;
    }
    let view = task_view(session, &task, &editor, timeout);
    session.leases.insert(
        editor,
        Lease {
            task,
            expires: state.0.clock.elapsed() + timeout,
        },
    );
    Ok(Json(NextResponse {
        schema_version: SCHEMA_VERSION,
        status: "task",
        task: Some(view),
    }))
}

fn wall_clock_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

async fn post_edit(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<usize>,
    Json(body): Json<PostEditRequest>,
) -> ApiResult<PostEditResponse> {
    let mut guard = state.lock();
    let session = live_session(&mut guard, &state)?;
    let id = SegmentId(id);
    let seg = session.scheduler.segment(id)?;
    if seg.state != SegmentState::InProgress {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "conflict",
            format!("segment {id} is {}, not in progress", seg.state.name()),
        ));
    }
    let holder = session
        .leases
        .iter()
        .find(|(_, l)| l.task.segment_id == id)
        .map(|(e, _)| e.clone());
    if let Some(holder) = &holder {
        if *holder != body.editor_id && holder != ANONYMOUS {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                "conflict",
                format!("segment {id} is leased to another editor"),
            ));
        }
    }
    let done = session.scheduler.complete(id, &body.edited_text, &body.editor_id, wall_clock_ms())?;
    if let Err(e) = session.journal.append(&done.event) {
        session.failed = Some(e.to_string());
        return Err(ApiError::new(
            StatusCode::INTERNAL_SERVER_ERROR,
            "session_failed",
            format!("post-edit not recorded: {e}"),
        ));
    }
    if let Some(holder) = holder {
        session.leases.remove(&holder);
    }
    let e = &done.event;
    Ok(Json(PostEditResponse {
        schema_version: SCHEMA_VERSION,
        seq: e.seq,
        segment_id: e.segment_id.0,
        hypothesis_index: e.hypothesis_index,
        realized_ter: e.realized_target,
        blind_prediction: e.blind_prediction,
        discrepancy: (e.blind_prediction - e.realized_target).abs(),
        sanity_flag: done.flag.as_ref().map(FlagView::from),
        auto_closed: done.auto_closed.iter().map(|s| s.0).collect(),
        queue_size: session.scheduler.counts().pending,
        model_step: session.scheduler.learner().model.step(),
    }))
}

async fn stats(State(state): State<AppState>) -> ApiResult<StatsResponse> {
    let mut guard = state.lock();
    let session = live_session(&mut guard, &state)?;
    let s = &session.scheduler;
    let c = s.counts();
    let total = c.total();
    Ok(Json(StatsResponse {
        schema_version: SCHEMA_VERSION,
        policy: s.config().policy.name(),
        pct_post_edited: 100.0 * c.post_edited as f64 / total as f64,
        counts: Counts {
            pending: c.pending,
            in_progress: c.in_progress,
            post_edited: c.post_edited,
            auto_closed: c.auto_closed,
        },
        total,
        corpus_quality: s.corpus_quality(),
        prequential: s.prequential_stats().map(|p| PrequentialView {
            samples: p.n,
            mae: p.mae,
            mse: p.mse,
            spearman_rho: p.spearman_rho,
            pearson_r: p.pearson_r,
            kendall_tau: p.kendall_tau,
        }),
        model_step: s.learner().model.step(),
        warmup_active: s.in_warmup(),
        rescores: s.queue_state().rescores,
        sanity_flags: s.flags().len(),
        last_seq: s.last_seq(),
    }))
}

async fn snapshot(State(state): State<AppState>) -> std::result::Result<Response, ApiError> {
    let mut guard = state.lock();
    let session = live_session(&mut guard, &state)?;
    let blob = session.scheduler.learner().model.snapshot();
    Ok(([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], blob).into_response())
}

async fn flags(State(state): State<AppState>) -> ApiResult<FlagsResponse> {
    let mut guard = state.lock();
    let session = live_session(&mut guard, &state)?;
    Ok(Json(FlagsResponse {
        schema_version: SCHEMA_VERSION,
        flags: session.scheduler.flags().iter().map(FlagView::from).collect(),
    }))
}

async fn ingest(State(state): State<AppState>, mut form: Multipart) -> ApiResult<IngestResponse> {
    let bad = |m: String| ApiError::new(StatusCode::BAD_REQUEST, "bad_request", m);
    let defaults = state.config().ingest_options().map_err(|e| bad(e.to_string()))?;
    let mut upload = UploadOptions {
        schema: defaults.schema.to_string(),
        source_lang: defaults.source_lang,
        target_lang: defaults.target_lang,
        has_header: defaults.has_header,
        skip_malformed: defaults.skip_malformed,
    };
    let mut data: Option<Vec<u8>> = None;
    while let Some(field) = form.next_field().await.map_err(|e| bad(e.to_string()))? {
        let name = field.name().unwrap_or_default().to_string();
        let bytes = field.bytes().await.map_err(|e| bad(e.to_string()))?;
        let text = || String::from_utf8_lossy(&bytes).trim().to_string();
        let flag = |v: String| matches!(v.as_str(), "1" | "true" | "yes");
        match name.as_str() {
            "file" => data = Some(bytes.to_vec()),
            "schema" => upload.schema = text(),
            "source_lang" => upload.source_lang = text(),
            "target_lang" => upload.target_lang = text(),
            "has_header" => upload.has_header = flag(text()),
            "skip_malformed" => upload.skip_malformed = flag(text()),
            other => return Err(bad(format!("unknown form field {other:?}"))),
        }
    }
    let data = data.ok_or_else(|| bad("missing `file` field".into()))?;

    let mut guard = state.lock();
    if guard.is_some() {
        return Err(ApiError::new(StatusCode::CONFLICT, "conflict", "a session is already active"));
    }
    let saved = serde_json::to_string(&upload).expect("plain struct serializes");
    let opts = upload.into_options().map_err(|e| bad(e.to_string()))?;
    let ingested = ingest_reader(data.as_slice(), "upload", &opts).map_err(|e| bad(e.to_string()))?;
    let config = state.config();
    let internal = |e: Error| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string());
    let session = Session::start(config, &ingested.corpus, &config.journal_path()).map_err(|e| bad(e.to_string()))?;
    let corpus_path = config.data_dir.join(UPLOADED_CORPUS);
    std::fs::write(&corpus_path, &data).at(&corpus_path).map_err(internal)?;
    let opts_path = config.data_dir.join(UPLOADED_OPTIONS);
    std::fs::write(&opts_path, saved).at(&opts_path).map_err(internal)?;
    *guard = Some(session);
    Ok(Json(IngestResponse {
        schema_version: SCHEMA_VERSION,
        segments: ingested.corpus.len(),
        rows: ingested.rows,
        skipped: ingested.skipped,
        corpus_fingerprint: pedal_core::simulator::corpus_fingerprint(&ingested.corpus),
    }))
}
