//! HTTP reward endpoint.
//!
//! `POST /v1/score` takes a line-delimited body. The first line is a header
//! `{"schema_version": 1, "batch_id": "b1", "config": {"alpha": 0.3}}`
//! (`config` optional); every further line is an item
//! `{"candidate_id": "c1", "task_id": "sql-001", "source": "..."}`.
//! The response is one JSON object
//! `{"schema_version": 1, "batch_id": "b1", "config": {...}, "rewards": [...], "timing": {...}}`
//! with one entry per item in request order: a reward record, or
//! `{"candidate_id", "task_id", "error": {"kind", "message"}}`.
//!
//! `GET /health` reports queue depth and in-flight batches.

use crate::config::{resolve_reward, ServiceConfig};
use axum::extract::{DefaultBodyLimit, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use pa_reward::reward::{RewardBreakdown, RewardConfig, RewardError, RewardOverrides, Scorer};
use pa_reward::task::{CandidateProgram, TaskSpec, SCHEMA_VERSION};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::HashMap;
use std::future::Future;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Instant;
use tokio::net::TcpListener;
use tokio::sync::Semaphore;

pub struct ServiceState {
    pub scorer: Arc<Scorer>,
    pub tasks: HashMap<String, TaskSpec>,
    pub file_overrides: RewardOverrides,
    pub cli_overrides: RewardOverrides,
    pub limits: ServiceConfig,
    slots: Semaphore,
    waiting: AtomicUsize,
    in_flight: AtomicUsize,
    draining: AtomicBool,
}

impl ServiceState {
    pub fn new(
        scorer: Scorer,
        tasks: Vec<TaskSpec>,
        file_overrides: RewardOverrides,
        cli_overrides: RewardOverrides,
        limits: ServiceConfig,
    ) -> Arc<Self> {
        Arc::new(ServiceState {
            scorer: Arc::new(scorer),
            tasks: tasks.into_iter().map(|t| (t.task_id.clone(), t)).collect(),
            file_overrides,
            cli_overrides,
            slots: Semaphore::new(limits.max_in_flight.max(1)),
            limits,
            waiting: AtomicUsize::new(0),
            in_flight: AtomicUsize::new(0),
            draining: AtomicBool::new(false),
        })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    schema_version: u32,
    batch_id: String,
    #[serde(default)]
    config: RewardOverrides,
}

#[derive(Debug, Deserialize)]
struct Item {
    candidate_id: String,
    task_id: String,
    #[serde(default)]
    source: String,
}

#[derive(Debug, Serialize)]
struct ItemError {
    kind: &'static str,
    message: String,
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
enum ItemResult {
    Reward(RewardBreakdown),
    Error { candidate_id: String, task_id: String, error: ItemError },
}

fn reject(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

fn parse_body(body: &str) -> Result<(Header, Vec<Item>), String> {
    let mut lines = body.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or("empty request body")?;
    let header: Header = serde_json::from_str(first).map_err(|e| format!("line 1: invalid header: {e}"))?;
    if header.schema_version != SCHEMA_VERSION {
        return Err(format!("unsupported schema_version {}, expected {SCHEMA_VERSION}", header.schema_version));
    }
    let items = lines
        .map(|(i, l)| serde_json::from_str::<Item>(l).map_err(|e| format!("line {}: invalid item: {e}", i + 1)))
        .collect::<Result<_, _>>()?;
    Ok((header, items))
}

/// Decrements a counter when dropped, so cancelled requests are accounted.
struct Gauge<'a>(&'a AtomicUsize);

impl<'a> Gauge<'a> {
    fn enter(c: &'a AtomicUsize) -> Self {
        c.fetch_add(1, Ordering::SeqCst);
        Gauge(c)
    }
}

impl Drop for Gauge<'_> {
    fn drop(&mut self) {
        self.0.fetch_sub(1, Ordering::SeqCst);
    }
}

async fn score(State(state): State<Arc<ServiceState>>, body: String) -> Response {
    let received = Instant::now();
    let (header, items) = match parse_body(&body) {
        Ok(p) => p,
        Err(e) => return reject(StatusCode::BAD_REQUEST, e),
    };
    if items.len() > state.limits.max_batch {
        return reject(
            StatusCode::PAYLOAD_TOO_LARGE,
            format!("batch has {} items; the limit is {}", items.len(), state.limits.max_batch),
        );
    }
    let config = resolve_reward(&state.file_overrides, &header.config, &state.cli_overrides);
    if let Err(e) = config.validate() {
        return reject(StatusCode::BAD_REQUEST, e.to_string());
    }
    if state.waiting.load(Ordering::SeqCst) >= state.limits.max_queue {
        return reject(
            StatusCode::SERVICE_UNAVAILABLE,
            format!("queue full ({} batches waiting); retry later", state.limits.max_queue),
        );
    }
    let permit = {
        let _queued = Gauge::enter(&state.waiting);
        state.slots.acquire().await.expect("semaphore is never closed")
    };
    let queued_ms = received.elapsed().as_millis() as u64;
    let _running = Gauge::enter(&state.in_flight);
    let started = Instant::now();
    let worker = state.clone();
    let rewards = tokio::task::spawn_blocking(move || score_items(&worker, items, &config)).await;
    drop(permit);
    let rewards = match rewards {
        Ok(r) => r,
        Err(e) => return reject(StatusCode::INTERNAL_SERVER_ERROR, format!("scoring task failed: {e}")),
    };
    Json(json!({
        "schema_version": SCHEMA_VERSION,
        "batch_id": header.batch_id,
        "config": config,
        "rewards": rewards,
        "timing": {"queued_ms": queued_ms, "scoring_ms": started.elapsed().as_millis() as u64},
    }))
    .into_response()
}

fn score_items(state: &ServiceState, items: Vec<Item>, config: &RewardConfig) -> Vec<ItemResult> {
    let candidates: Vec<CandidateProgram> = items
        .into_iter()
        .map(|i| CandidateProgram { candidate_id: i.candidate_id, task_id: i.task_id, source: i.source })
        .collect();
    let known: Vec<(&CandidateProgram, &TaskSpec)> =
        candidates.iter().filter_map(|c| state.tasks.get(&c.task_id).map(|t| (c, t))).collect();
    let mut scored = state.scorer.score_batch(&known, config).into_iter();
    candidates
        .iter()
        .map(|c| {
            let result = match state.tasks.get(&c.task_id) {
                None => Err(RewardError::UnknownTask { candidate_id: c.candidate_id.clone(), task_id: c.task_id.clone() }),
                Some(_) => scored.next().expect("one result per known item"),
            };
            match result {
                Ok(b) => ItemResult::Reward(b),
                Err(e) => ItemResult::Error {
                    candidate_id: c.candidate_id.clone(),
                    task_id: c.task_id.clone(),
                    error: ItemError { kind: e.kind(), message: e.to_string() },
                },
            }
        })
        .collect()
}

async fn health(State(state): State<Arc<ServiceState>>) -> Json<Value> {
    let waiting = state.waiting.load(Ordering::SeqCst);
    let in_flight = state.in_flight.load(Ordering::SeqCst);
    Json(json!({
        "status": if state.draining.load(Ordering::SeqCst) { "draining" } else { "ok" },
        "queue_depth": waiting,
        "in_flight": in_flight,
        "tasks": state.tasks.len(),
        "max_batch": state.limits.max_batch,
        "schema_version": SCHEMA_VERSION,
    }))
}

pub fn router(state: Arc<ServiceState>) -> Router {
    let body_limit = state.limits.max_body_bytes;
    Router::new()
        .route("/health", get(health))
        .route("/v1/score", post(score))
        .layer(DefaultBodyLimit::max(body_limit))
        .with_state(state)
}

/// Serves until `shutdown` resolves, then finishes in-flight batches.
pub async fn serve(
    listener: TcpListener,
    state: Arc<ServiceState>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let flag = state.clone();
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async move {
            shutdown.await;
            flag.draining.store(true, Ordering::SeqCst);
            log::info!("shutting down; draining in-flight batches");
        })
        .await
}

/// Resolves on Ctrl-C or SIGTERM.
pub async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
}
