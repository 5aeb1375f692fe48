//! Read-only JSON API over an extracted output directory.
//!
//! All timestamps in responses are epoch milliseconds. Query timestamps
//! (`from`, `to`) accept ISO-8601 or epoch milliseconds.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use pm_core::analytics::{case_statistics, handover_of_work, similar_activities, working_together, SnaMetric};
use pm_core::bpmn::{decorate_model, TASK_TYPES};
use pm_core::discovery::{discover_dfg, DfgDocument};
use pm_core::{EventLog, Timestamp};
use serde::Serialize;
use serde_json::json;
use tower_http::services::ServeDir;

use crate::loader::LoadedModel;
use crate::store::{Store, StoreError};
use crate::timefmt::parse_ts;

/// Everything the service answers from, loaded once at start-up.
#[derive(Debug, Default)]
pub struct ApiData {
    pub logs: BTreeMap<String, EventLog>,
    pub models: BTreeMap<String, LoadedModel>,
}

impl ApiData {
    /// Reads the stored logs and models. `activity_type_filter`, when not
    /// empty, is applied to every log up front.
    pub fn load(store: &Store, activity_type_filter: &BTreeSet<String>) -> Result<ApiData, StoreError> {
        let mut logs = store.read_logs()?;
        if !activity_type_filter.is_empty() {
            for log in logs.values_mut() {
                *log = log.filter_activity_types(activity_type_filter);
            }
        }
        let loaded = store.read_models();
        for w in &loaded.warnings {
            log::warn!("{w}");
        }
        Ok(ApiData {
            logs,
            models: loaded.models,
        })
    }
}

type Shared = Arc<ApiData>;

#[derive(Debug)]
pub enum ApiError {
    UnknownProcess { key: String, known: Vec<String> },
    NotFound(String),
    BadParam { field: String, message: String },
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match self {
            ApiError::UnknownProcess { key, known } => (
                StatusCode::NOT_FOUND,
                json!({"error": format!("unknown process `{key}`"), "known": known}),
            ),
            ApiError::NotFound(message) => (StatusCode::NOT_FOUND, json!({"error": message})),
            ApiError::BadParam { field, message } => {
                (StatusCode::BAD_REQUEST, json!({"error": message, "field": field}))
            }
        };
        (status, Json(body)).into_response()
    }
}

fn bad(field: &str, message: impl Into<String>) -> ApiError {
    ApiError::BadParam {
        field: field.to_string(),
        message: message.into(),
    }
}

/// Rejects parameters outside `allowed`.
fn check_params(q: &HashMap<String, String>, allowed: &[&str]) -> Result<(), ApiError> {
    let mut unknown: Vec<&String> = q.keys().filter(|k| !allowed.contains(&k.as_str())).collect();
    unknown.sort();
    match unknown.first() {
        Some(k) => Err(bad(k, format!("unknown query parameter `{k}`"))),
        None => Ok(()),
    }
}

fn time_param(q: &HashMap<String, String>, field: &str) -> Result<Option<Timestamp>, ApiError> {
    let Some(v) = q.get(field).filter(|v| !v.is_empty()) else {
        return Ok(None);
    };
    if let Ok(ms) = v.parse::<i64>() {
        return Ok(Some(Timestamp(ms)));
    }
    parse_ts(v)
        .map(Some)
        .ok_or_else(|| bad(field, format!("`{v}` is not an ISO-8601 timestamp or epoch milliseconds")))
}

fn log_of<'a>(data: &'a ApiData, key: &str) -> Result<&'a EventLog, ApiError> {
    data.logs.get(key).ok_or_else(|| ApiError::UnknownProcess {
        key: key.to_string(),
        known: data.logs.keys().cloned().collect(),
    })
}

#[derive(Serialize)]
struct ProcessInfo<'a> {
    key: &'a str,
    n_cases: usize,
    n_events: usize,
}

async fn processes(State(data): State<Shared>, Query(q): Query<HashMap<String, String>>) -> Result<Response, ApiError> {
    check_params(&q, &[])?;
    let list: Vec<ProcessInfo> = data
        .logs
        .iter()
        .map(|(key, log)| ProcessInfo {
            key,
            n_cases: log.traces.len(),
            n_events: log.n_events(),
        })
        .collect();
    Ok(Json(list).into_response())
}

/// Log restricted by the `types` and `from`/`to` parameters.
pub fn filtered_log(log: &EventLog, types: &str, from: Option<Timestamp>, to: Option<Timestamp>) -> Option<EventLog> {
    let typed = match types {
        "all" => log.clone(),
        "task" => log.filter_activity_types(&TASK_TYPES.iter().map(|s| s.to_string()).collect()),
        _ => return None,
    };
    Some(typed.filter_time_range(from, to))
}

async fn dfg(
    State(data): State<Shared>,
    Path(key): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Response, ApiError> {
    let log = log_of(&data, &key)?;
    check_params(&q, &["types", "from", "to"])?;
    let types = q.get("types").map_or("all", String::as_str);
    let (from, to) = (time_param(&q, "from")?, time_param(&q, "to")?);
    if let (Some(f), Some(t)) = (from, to) {
        if f > t {
            return Err(bad("from", "`from` is after `to`"));
        }
    }
    let log = filtered_log(log, types, from, to).ok_or_else(|| bad("types", format!("`{types}` is not one of task, all")))?;
    Ok(Json(DfgDocument::from(discover_dfg(&log))).into_response())
}

async fn cases(
    State(data): State<Shared>,
    Path(key): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Response, ApiError> {
    let log = log_of(&data, &key)?;
    check_params(&q, &["top"])?;
    let mut list = case_statistics(log);
    if let Some(v) = q.get("top") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| bad("top", format!("`{v}` is not a positive integer")))?;
        list.truncate(n);
    }
    Ok(Json(list).into_response())
}

async fn case_detail(
    State(data): State<Shared>,
    Path((key, case_id)): Path<(String, String)>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Response, ApiError> {
    let log = log_of(&data, &key)?;
    check_params(&q, &[])?;
    let trace = log
        .trace(&case_id)
        .ok_or_else(|| ApiError::NotFound(format!("process `{key}` has no case `{case_id}`")))?;
    Ok(Json(json!({"case_id": trace.case_id, "events": trace.events})).into_response())
}

async fn sna(
    State(data): State<Shared>,
    Path(key): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Response, ApiError> {
    let log = log_of(&data, &key)?;
    check_params(&q, &["metric", "normalize"])?;
    let metric: SnaMetric = match q.get("metric") {
        None => SnaMetric::Handover,
        Some(m) => m.parse().map_err(|e: String| bad("metric", e))?,
    };
    let normalize = match q.get("normalize").map(String::as_str) {
        None | Some("false") => false,
        Some("true") => true,
        Some(v) => return Err(bad("normalize", format!("`{v}` is not true or false"))),
    };
    let m = match metric {
        SnaMetric::Handover => handover_of_work(log),
        SnaMetric::WorkingTogether => working_together(log),
        SnaMetric::SimilarActivities => similar_activities(log),
    };
    Ok(Json(if normalize { m.row_normalized() } else { m }).into_response())
}

fn model_of<'a>(data: &'a ApiData, key: &str) -> Result<(&'a EventLog, &'a LoadedModel), ApiError> {
    let log = log_of(data, key)?;
    let model = data
        .models
        .get(key)
        .ok_or_else(|| ApiError::NotFound(format!("no BPMN model for process `{key}`")))?;
    Ok((log, model))
}

async fn model(
    State(data): State<Shared>,
    Path(key): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Response, ApiError> {
    check_params(&q, &[])?;
    let (_, m) = model_of(&data, &key)?;
    Ok(([(header::CONTENT_TYPE, "application/xml")], m.xml.clone()).into_response())
}

async fn decoration(
    State(data): State<Shared>,
    Path(key): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Response, ApiError> {
    check_params(&q, &[])?;
    let (log, m) = model_of(&data, &key)?;
    Ok(Json(decorate_model(&m.graph, log)).into_response())
}

async fn api_fallback() -> ApiError {
    ApiError::NotFound("no such endpoint".into())
}

/// API routes, plus static files from `ui_dir` for every other path.
pub fn router(data: ApiData, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/processes", get(processes))
        .route("/processes/{key}/dfg", get(dfg))
        .route("/processes/{key}/cases", get(cases))
        .route("/processes/{key}/cases/{case_id}", get(case_detail))
        .route("/processes/{key}/sna", get(sna))
        .route("/processes/{key}/model", get(model))
        .route("/processes/{key}/decoration", get(decoration))
        .fallback(api_fallback)
        .with_state(Arc::new(data));
    let app = Router::new().nest("/api", api);
    match ui_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app,
    }
}

pub async fn serve(data: ApiData, ui_dir: Option<PathBuf>, port: u16) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(data, ui_dir)).await
}
