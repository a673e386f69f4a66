//! JSON HTTP facade over the served corpus and the usage-event log.
//!
//! Handlers read a shared `Arc<ServedCorpus>`; [`AppState::reload`] swaps it
//! atomically. Event intake goes through a single mutex-guarded writer so
//! each accepted event lands as one whole line.

mod citation;
mod error;

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Utc;
use serde::{Deserialize, Serialize};

pub use citation::{render_citation, CitationFormat};
pub use error::{ApiError, ErrorBody, ErrorEnvelope};

use crate::analytics::{UsageEvent, Vocabulary};
use crate::artifacts::{ArtifactDir, CorpusStats, ServedCorpus};
use crate::error::Result;
use crate::linkstore::{LinkLabel, LinkedEntry};
use crate::model::{Category, CategoryFilter, Material, Record};
use crate::search::{execute_query, FacetField, SearchQuery, SearchResult, MAX_LIMIT};

pub struct AppState {
    corpus: RwLock<Option<Arc<ServedCorpus>>>,
    artifacts: Option<ArtifactDir>,
    vocabulary: Vocabulary,
    log: Mutex<Option<File>>,
}

impl AppState {
    /// State with no corpus; `log_path` receives accepted events.
    pub fn new(vocabulary: Vocabulary, log_path: Option<&Path>) -> Result<Self> {
        let log = match log_path {
            Some(p) => {
                if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                    std::fs::create_dir_all(parent)?;
                }
                Some(OpenOptions::new().create(true).append(true).open(p)?)
            }
            None => None,
        };
        Ok(AppState {
            corpus: RwLock::new(None),
            artifacts: None,
            vocabulary,
            log: Mutex::new(log),
        })
    }

    /// Serves the artifacts in `dir`; [`AppState::reload`] rereads them.
    pub fn with_artifacts(mut self, dir: ArtifactDir) -> Self {
        self.artifacts = Some(dir);
        self
    }

    pub fn corpus(&self) -> Option<Arc<ServedCorpus>> {
        self.corpus.read().expect("corpus lock poisoned").clone()
    }

    pub fn set_corpus(&self, corpus: Option<ServedCorpus>) {
        *self.corpus.write().expect("corpus lock poisoned") = corpus.map(Arc::new);
    }

    /// Loads the artifact directory and swaps it in; the old corpus stays on failure.
    pub fn reload(&self) -> Result<()> {
        if let Some(dir) = &self.artifacts {
            let fresh = ServedCorpus::load(dir)?;
            self.set_corpus(Some(fresh));
        }
        Ok(())
    }

    fn append_event(&self, event: &UsageEvent) -> std::io::Result<()> {
        let mut line = serde_json::to_vec(event)?;
        line.push(b'\n');
        let mut guard = self.log.lock().expect("log lock poisoned");
        if let Some(file) = guard.as_mut() {
            file.write_all(&line)?;
            file.flush()?;
        }
        Ok(())
    }

    pub fn log_path_is_set(&self) -> bool {
        self.log.lock().map(|g| g.is_some()).unwrap_or(false)
    }
}

pub type SharedState = Arc<AppState>;

pub fn router(state: SharedState) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/search", get(search))
        .route("/api/record/{id}", get(record))
        .route("/api/record/{id}/links", get(record_links))
        .route("/api/record/{id}/citation", get(citation))
        .route("/api/log", post(log_event))
        .route("/api/stats", get(stats))
        .fallback(|| async { ApiError::not_found("no such endpoint") })
        .method_not_allowed_fallback(|| async {
            ApiError::new(
                StatusCode::METHOD_NOT_ALLOWED,
                "method-not-allowed",
                "method not allowed",
            )
        })
        .with_state(state)
}

/// Serves until the listener fails or the process is stopped.
pub async fn serve(state: SharedState, listener: tokio::net::TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

fn loaded(state: &AppState) -> std::result::Result<Arc<ServedCorpus>, ApiError> {
    state.corpus().ok_or_else(ApiError::unavailable)
}

type Params = std::result::Result<Query<Vec<(String, String)>>, QueryRejection>;

fn params(raw: Params) -> std::result::Result<Vec<(String, String)>, ApiError> {
    raw.map(|Query(p)| p)
        .map_err(|e| ApiError::bad_request("invalid-parameter", e.body_text()))
}

fn last<'a>(params: &'a [(String, String)], key: &str) -> Option<&'a str> {
    params
        .iter()
        .rev()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
}

fn parse_category_filter(raw: Option<&str>) -> std::result::Result<CategoryFilter, ApiError> {
    match raw.map(str::trim).filter(|s| !s.is_empty()) {
        None => Ok(CategoryFilter::All),
        Some(s) => s
            .parse()
            .map_err(|_| ApiError::bad_request("invalid-category", format!("invalid type `{s}`"))),
    }
}

fn parse_usize(
    params: &[(String, String)],
    key: &str,
    default: usize,
) -> std::result::Result<usize, ApiError> {
    match last(params, key).map(str::trim).filter(|s| !s.is_empty()) {
        None => Ok(default),
        Some(s) => s.parse().map_err(|_| {
            ApiError::bad_request(
                "invalid-parameter",
                format!("`{key}` must be a non-negative integer"),
            )
        }),
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub corpus_loaded: bool,
}

async fn health(State(state): State<SharedState>) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        corpus_loaded: state.corpus().is_some(),
    })
}

/// Builds a query from `q`, `type`, facet params (repeatable), `from` and `size`.
pub fn search_query_from_params(
    params: &[(String, String)],
) -> std::result::Result<SearchQuery, ApiError> {
    let category = parse_category_filter(last(params, "type"))?;
    let offset = parse_usize(params, "from", 0)?;
    let limit = parse_usize(params, "size", 10)?;
    if limit == 0 || limit > MAX_LIMIT {
        return Err(ApiError::bad_request(
            "invalid-size",
            format!("size must be between 1 and {MAX_LIMIT}"),
        ));
    }
    let mut query = SearchQuery::parse(last(params, "q").unwrap_or(""))
        .category(category)
        .page(offset, limit);
    for (key, value) in params {
        if let Ok(field) = key.parse::<FacetField>() {
            for v in value.split(',').map(str::trim).filter(|v| !v.is_empty()) {
                query = query.filter(field, v);
            }
        }
    }
    Ok(query)
}

async fn search(
    State(state): State<SharedState>,
    raw: Params,
) -> std::result::Result<Json<SearchResult>, ApiError> {
    let params = params(raw)?;
    let query = search_query_from_params(&params)?;
    let corpus = loaded(&state)?;
    execute_query(&corpus.index, &corpus.records, &query)
        .map(Json)
        .map_err(|e| ApiError::bad_request("invalid-query", e.to_string()))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RecordDetail {
    pub record: Record,
    pub link_counts: BTreeMap<Category, usize>,
    pub label_counts: BTreeMap<LinkLabel, usize>,
    pub link_total: usize,
    /// True when the record has no links, so no link boxes are shown.
    pub link_boxes_omitted: bool,
    pub materials: Vec<Material>,
}

/// Record plus its link-box counts, as served by `/api/record/{id}`.
pub fn record_detail(corpus: &ServedCorpus, record: &Record) -> RecordDetail {
    let empty;
    let summary = match corpus.link_index.summary(&record.id) {
        Some(s) => s,
        None => {
            empty = crate::linkstore::LinkSummary::empty(&record.id);
            &empty
        }
    };
    RecordDetail {
        link_counts: summary.by_category.clone(),
        label_counts: summary.by_label.clone(),
        link_total: summary.total(),
        link_boxes_omitted: summary.total() == 0,
        materials: record.materials.clone(),
        record: record.clone(),
    }
}

fn lookup<'a>(corpus: &'a ServedCorpus, id: &str) -> std::result::Result<&'a Record, ApiError> {
    corpus
        .get(id)
        .ok_or_else(|| ApiError::not_found(format!("unknown record `{id}`")))
}

async fn record(
    State(state): State<SharedState>,
    UrlPath(id): UrlPath<String>,
) -> std::result::Result<Json<RecordDetail>, ApiError> {
    let corpus = loaded(&state)?;
    let record = lookup(&corpus, &id)?;
    Ok(Json(record_detail(&corpus, record)))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RecordLinks {
    pub record_id: String,
    #[serde(rename = "type")]
    pub category: CategoryFilter,
    pub entries: Vec<LinkedEntry>,
}

async fn record_links(
    State(state): State<SharedState>,
    UrlPath(id): UrlPath<String>,
    raw: Params,
) -> std::result::Result<Json<RecordLinks>, ApiError> {
    let params = params(raw)?;
    let category = parse_category_filter(last(&params, "type"))?;
    let corpus = loaded(&state)?;
    let record = lookup(&corpus, &id)?;
    let entries = corpus
        .link_index
        .summary(&record.id)
        .map(|s| {
            s.entries
                .iter()
                .filter(|e| category.admits(e.category))
                .cloned()
                .collect()
        })
        .unwrap_or_default();
    Ok(Json(RecordLinks {
        record_id: record.id.clone(),
        category,
        entries,
    }))
}

async fn citation(
    State(state): State<SharedState>,
    UrlPath(id): UrlPath<String>,
    raw: Params,
) -> std::result::Result<Response, ApiError> {
    let params = params(raw)?;
    let format: CitationFormat = last(&params, "format")
        .ok_or_else(|| ApiError::bad_request("unknown-format", "missing `format`"))?
        .parse()
        .map_err(|e: String| ApiError::bad_request("unknown-format", e))?;
    let corpus = loaded(&state)?;
    let record = lookup(&corpus, &id)?;
    let body = render_citation(record, format);
    Ok(([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], body).into_response())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LogAck {
    pub accepted: bool,
    pub timestamp: chrono::DateTime<Utc>,
}

/// Validates an event body; a missing timestamp becomes `now`.
pub fn parse_log_event(
    body: &[u8],
    vocabulary: &Vocabulary,
    now: chrono::DateTime<Utc>,
) -> std::result::Result<UsageEvent, ApiError> {
    let mut value: serde_json::Value = serde_json::from_slice(body)
        .map_err(|e| ApiError::bad_request("malformed-body", format!("body is not JSON: {e}")))?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| ApiError::bad_request("malformed-body", "body must be a JSON object"))?;
    match obj.get("client_id").and_then(|v| v.as_str()) {
        Some(c) if !c.trim().is_empty() => {}
        _ => {
            return Err(ApiError::bad_request(
                "missing-client-id",
                "client_id is required",
            ))
        }
    }
    let action = obj
        .get("action")
        .and_then(|v| v.as_str())
        .unwrap_or("")
        .to_string();
    if !vocabulary.contains(&action) {
        return Err(ApiError::bad_request(
            "unknown-action",
            format!("unknown action `{action}`"),
        ));
    }
    if obj.get("timestamp").is_none_or(|v| v.is_null()) {
        obj.insert(
            "timestamp".into(),
            serde_json::to_value(now).expect("timestamps serialize"),
        );
    }
    serde_json::from_value(value)
        .map_err(|e| ApiError::unprocessable("invalid-event", e.to_string()))
}

async fn log_event(
    State(state): State<SharedState>,
    body: Bytes,
) -> std::result::Result<(StatusCode, Json<LogAck>), ApiError> {
    let event = parse_log_event(&body, &state.vocabulary, Utc::now())?;
    let state2 = state.clone();
    let to_write = event.clone();
    tokio::task::spawn_blocking(move || state2.append_event(&to_write))
        .await
        .map_err(|e| {
            ApiError::new(
                StatusCode::SERVICE_UNAVAILABLE,
                "log-unavailable",
                e.to_string(),
            )
        })?
        .map_err(|e| {
            ApiError::new(
                StatusCode::SERVICE_UNAVAILABLE,
                "log-unavailable",
                e.to_string(),
            )
        })?;
    Ok((
        StatusCode::ACCEPTED,
        Json(LogAck {
            accepted: true,
            timestamp: event.timestamp,
        }),
    ))
}

async fn stats(
    State(state): State<SharedState>,
) -> std::result::Result<Json<CorpusStats>, ApiError> {
    Ok(Json(loaded(&state)?.stats()))
}

/// Default event-log location inside an artifact directory.
pub fn default_log_path(dir: &Path) -> PathBuf {
    dir.join("events.jsonl")
}
