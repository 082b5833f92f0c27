//! The HTTP service: problem listing, submission grading, learner models.
//!
//! Endpoints, all JSON:
//!
//! * `GET /api/v1/problems?learner=ID`
//! * `GET /api/v1/problems/{id}?learner=ID`
//! * `POST /api/v1/problems/{id}/submissions` with `{"learner": .., "source": ..}`
//! * `GET /api/v1/learners/{id}/model`
//!
//! Every graded attempt is appended to a JSON-lines log and synced to disk
//! before the response is sent. On startup the log is replayed to rebuild
//! the learner models. Attempts of one learner on one problem are
//! serialized so attempt numbers stay gapless.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use axum::extract::{DefaultBodyLimit, Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use crate::bundle::{ProblemBundle, Repository};
use crate::grader::{grade_isolated, FeedbackReport};
use crate::testgen::master_seed;
use crate::tutor::{compute_distance, update_model, AttemptRecord, HintLadder, LearnerModel};

pub const MAX_SOURCE_BYTES: usize = 64 * 1024;
pub const DEFAULT_GRADE_TIMEOUT: Duration = Duration::from_secs(5);
const MAX_BODY_BYTES: usize = 1 << 20;
const MAX_LEARNER_ID: usize = 128;

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("attempt log {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("attempt log {path}, line {line}: {message}")]
    Corrupt { path: PathBuf, line: usize, message: String },
}

/// Append-only JSON-lines store of [`AttemptRecord`]s.
pub struct AttemptLog {
    path: PathBuf,
    file: Mutex<File>,
}

impl AttemptLog {
    /// Opens or creates the log and returns the records in it. An
    /// incomplete last line, left by a crash mid-write, is cut off.
    pub fn open(path: &Path) -> Result<(AttemptLog, Vec<AttemptRecord>), LogError> {
        let io = |source| LogError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(path)
            .map_err(io)?;
        let mut records = Vec::new();
        let mut good_len = 0u64;
        let mut reader = BufReader::new(&file);
        let mut line = String::new();
        let mut number = 0;
        loop {
            line.clear();
            let n = reader.read_line(&mut line).map_err(io)?;
            if n == 0 {
                break;
            }
            number += 1;
            if !line.ends_with('\n') {
                tracing::warn!(path = %path.display(), "dropping incomplete last attempt record");
                break;
            }
            if !line.trim().is_empty() {
                let rec: AttemptRecord = serde_json::from_str(&line).map_err(|e| LogError::Corrupt {
                    path: path.to_path_buf(),
                    line: number,
                    message: e.to_string(),
                })?;
                records.push(rec);
            }
            good_len += n as u64;
        }
        drop(reader);
        if file.metadata().map_err(io)?.len() != good_len {
            file.set_len(good_len).map_err(io)?;
            file.seek(SeekFrom::End(0)).map_err(io)?;
        }
        Ok((
            AttemptLog {
                path: path.to_path_buf(),
                file: Mutex::new(file),
            },
            records,
        ))
    }

    /// Writes one record and syncs it to disk.
    pub fn append(&self, record: &AttemptRecord) -> Result<(), LogError> {
        let mut line = serde_json::to_string(record).expect("records serialize");
        line.push('\n');
        let mut f = self.file.lock().unwrap_or_else(|e| e.into_inner());
        f.write_all(line.as_bytes())
            .and_then(|_| f.sync_data())
            .map_err(|source| LogError::Io {
                path: self.path.clone(),
                source,
            })
    }
}

/// Rebuilds learner models from log records, in log order.
pub fn replay(repo: &Repository, records: &[AttemptRecord]) -> HashMap<String, LearnerModel> {
    let mut models: HashMap<String, LearnerModel> = HashMap::new();
    let empty = HintLadder::default();
    for r in records {
        let (ladder, domains) = match repo.get(&r.problem) {
            Some(b) => (&b.hints, b.domains.as_slice()),
            None => (&empty, &[][..]),
        };
        let model = models.entry(r.learner.clone()).or_default();
        if let Err(e) = update_model(model, r, ladder, domains) {
            tracing::warn!(learner = %r.learner, "skipping attempt record: {e}");
        }
    }
    models
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub grade_timeout: Duration,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            grade_timeout: DEFAULT_GRADE_TIMEOUT,
        }
    }
}

type PairLock = Arc<tokio::sync::Mutex<()>>;

pub struct AppState {
    repo: Arc<Repository>,
    log: Option<Arc<AttemptLog>>,
    models: RwLock<HashMap<String, LearnerModel>>,
    locks: Mutex<HashMap<(String, String), PairLock>>,
    config: ServiceConfig,
}

impl AppState {
    /// A service whose attempts are persisted to `log_path`.
    pub fn with_log(repo: Repository, log_path: &Path, config: ServiceConfig) -> Result<Arc<AppState>, LogError> {
        let (log, records) = AttemptLog::open(log_path)?;
        let models = replay(&repo, &records);
        Ok(Arc::new(AppState {
            repo: Arc::new(repo),
            log: Some(Arc::new(log)),
            models: RwLock::new(models),
            locks: Mutex::new(HashMap::new()),
            config,
        }))
    }

    /// A service that keeps attempts in memory only.
    pub fn in_memory(repo: Repository, config: ServiceConfig) -> Arc<AppState> {
        Arc::new(AppState {
            repo: Arc::new(repo),
            log: None,
            models: RwLock::new(HashMap::new()),
            locks: Mutex::new(HashMap::new()),
            config,
        })
    }

    pub fn model(&self, learner: &str) -> LearnerModel {
        self.models
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(learner)
            .cloned()
            .unwrap_or_default()
    }

    fn pair_lock(&self, learner: &str, problem: &str) -> PairLock {
        let mut locks = self.locks.lock().unwrap_or_else(|e| e.into_inner());
        locks
            .entry((learner.to_string(), problem.to_string()))
            .or_default()
            .clone()
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/v1/problems", get(list_problems))
        .route("/api/v1/problems/{id}", get(get_problem))
        .route("/api/v1/problems/{id}/submissions", post(submit))
        .route("/api/v1/learners/{id}/model", get(learner_model))
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .with_state(state)
}

/// Serves until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ApiError {
    #[error("no problem with id `{0}`")]
    NotFound(String),
    #[error("source is {0} bytes; the limit is {MAX_SOURCE_BYTES}")]
    PayloadTooLarge(usize),
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match self {
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::PayloadTooLarge(_) => StatusCode::PAYLOAD_TOO_LARGE,
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(serde_json::json!({ "error": self.to_string() }))).into_response()
    }
}

#[derive(Debug, Deserialize)]
struct LearnerQuery {
    learner: Option<String>,
}

fn check_learner(id: &str) -> Result<(), ApiError> {
    if id.is_empty() || id.len() > MAX_LEARNER_ID || id.chars().any(char::is_control) {
        return Err(ApiError::BadRequest(format!(
            "learner id must be 1 to {MAX_LEARNER_ID} printable characters"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProblemSummary {
    pub id: String,
    pub title: String,
    pub domains: Vec<String>,
    pub solved: bool,
}

async fn list_problems(
    State(state): State<Arc<AppState>>,
    Query(q): Query<LearnerQuery>,
) -> Json<Vec<ProblemSummary>> {
    let model = q.learner.as_deref().map(|l| state.model(l)).unwrap_or_default();
    Json(
        state
            .repo
            .iter()
            .map(|b| ProblemSummary {
                id: b.id.clone(),
                title: b.title.clone(),
                domains: b.domains.clone(),
                solved: model.progress(&b.id).is_some_and(|p| p.solved),
            })
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProblemView {
    pub id: String,
    pub title: String,
    pub description: String,
    pub domains: Vec<String>,
    /// Hints released to the requesting learner.
    pub hints: Vec<String>,
    pub attempts: u64,
    pub solved: bool,
}

async fn get_problem(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<LearnerQuery>,
) -> Result<Json<ProblemView>, ApiError> {
    let b = state.repo.get(&id).ok_or_else(|| ApiError::NotFound(id.clone()))?;
    let model = q.learner.as_deref().map(|l| state.model(l)).unwrap_or_default();
    let progress = model.progress(&id).cloned().unwrap_or_default();
    Ok(Json(ProblemView {
        id: b.id.clone(),
        title: b.title.clone(),
        description: b.description.clone(),
        domains: b.domains.clone(),
        hints: b.hints.hints_due(progress.failed_attempts).into_iter().map(String::from).collect(),
        attempts: progress.attempts,
        solved: progress.solved,
    }))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubmissionRequest {
    pub learner: String,
    pub source: String,
}

/// The submission response; the CLI prints the same shape with `--json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SubmissionResponse {
    #[serde(flatten)]
    pub report: FeedbackReport,
    pub distance: f64,
    /// Difference to the previous attempt's distance.
    pub distance_change: Option<f64>,
    /// All hints released after this attempt.
    pub hints: Vec<String>,
    /// Hints released by this attempt.
    pub new_hints: Vec<String>,
    pub attempt: u64,
}

impl SubmissionResponse {
    /// A response for a report graded outside any learner history.
    pub fn standalone(report: FeedbackReport) -> Self {
        SubmissionResponse {
            distance: compute_distance(&report),
            report,
            distance_change: None,
            hints: Vec::new(),
            new_hints: Vec::new(),
            attempt: 1,
        }
    }
}

fn now_millis() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

async fn submit(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Json(req): Json<SubmissionRequest>,
) -> Result<Json<SubmissionResponse>, ApiError> {
    let bundle: ProblemBundle = state.repo.get(&id).ok_or_else(|| ApiError::NotFound(id.clone()))?.clone();
    if req.source.len() > MAX_SOURCE_BYTES {
        return Err(ApiError::PayloadTooLarge(req.source.len()));
    }
    check_learner(&req.learner)?;

    let pair = state.pair_lock(&req.learner, &id);
    let _guard = pair.lock().await;
    let before = state.model(&req.learner).progress(&id).cloned().unwrap_or_default();
    let attempt = before.attempts + 1;
    let seed = master_seed(&id, &req.learner, attempt);
    let deadline = Instant::now() + state.config.grade_timeout;
    let source = req.source.clone();
    let graded = tokio::task::spawn_blocking(move || {
        let report = grade_isolated(&bundle, &source, seed, Some(deadline));
        (bundle, report)
    })
    .await
    .map_err(|e| ApiError::Internal(format!("grading task failed: {e}")))?;
    let (bundle, report) = graded;
    let report = report.map_err(|e| {
        tracing::error!(problem = %id, "grading failed: {e}");
        ApiError::Internal(e.to_string())
    })?;
    let distance = compute_distance(&report);
    let record = AttemptRecord {
        learner: req.learner.clone(),
        problem: id.clone(),
        attempt,
        source: req.source,
        verdict: report.verdict,
        distance,
        seed,
        timestamp: now_millis(),
    };
    if let Some(log) = &state.log {
        let log = log.clone();
        let rec = record.clone();
        tokio::task::spawn_blocking(move || log.append(&rec))
            .await
            .map_err(|e| ApiError::Internal(e.to_string()))?
            .map_err(|e| {
                tracing::error!("{e}");
                ApiError::Internal("could not record the attempt".into())
            })?;
    }
    let progress = {
        let mut models = state.models.write().unwrap_or_else(|e| e.into_inner());
        let model = models.entry(req.learner.clone()).or_default();
        update_model(model, &record, &bundle.hints, &bundle.domains)
            .map_err(|e| ApiError::Internal(e.to_string()))?;
        model.progress(&id).cloned().unwrap_or_default()
    };
    tracing::info!(
        learner = %req.learner,
        problem = %id,
        attempt,
        verdict = ?report.verdict,
        "graded submission"
    );
    let hints: Vec<String> = bundle
        .hints
        .hints_due(progress.failed_attempts)
        .into_iter()
        .map(String::from)
        .collect();
    let new_hints = hints[before.hints_released.min(hints.len())..].to_vec();
    Ok(Json(SubmissionResponse {
        report,
        distance,
        distance_change: progress.distance_change(),
        hints,
        new_hints,
        attempt,
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ModelView {
    pub learner: String,
    #[serde(flatten)]
    pub model: LearnerModel,
}

async fn learner_model(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Json<ModelView> {
    Json(ModelView {
        model: state.model(&id),
        learner: id,
    })
}
