//! HTTP service hosting the outer loop. Handlers translate requests into
//! [`Command`]s on the single shared service; a background thread ticks it.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path, Request, State};
use axum::http::{header, Method, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use autorec_core::online::TrialEnv;
use serde_json::{json, Value};

use crate::api::{parse_body, AbortBody, ApiError, Command, CommandKind, ReorderBody, Service, SteeringBody};

/// Every route and the command it runs. `/healthz` is the only route
/// outside the command set.
pub const ROUTES: [(&str, &str, CommandKind); 9] = [
    ("GET", "/trials", CommandKind::ListTrials),
    ("GET", "/trials/{id}", CommandKind::GetTrial),
    ("POST", "/trials", CommandKind::SubmitTrial),
    ("POST", "/trials/{id}/abort", CommandKind::AbortTrial),
    ("POST", "/queue/reorder", CommandKind::ReorderQueue),
    ("GET", "/journal", CommandKind::ShowJournal),
    ("POST", "/steering", CommandKind::AddSteering),
    ("GET", "/steering/{persona}", CommandKind::ShowSteering),
    ("GET", "/experiments/{id}/metrics", CommandKind::ExperimentMetrics),
];

pub type Shared = Arc<Mutex<Service>>;

#[derive(Clone)]
struct AppState {
    service: Shared,
    token: Option<Arc<str>>,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

async fn run(state: &AppState, cmd: Command) -> Result<Json<Value>, ApiError> {
    let service = state.service.clone();
    tokio::task::spawn_blocking(move || service.lock().unwrap_or_else(|e| e.into_inner()).execute(cmd))
        .await
        .map_err(|e| ApiError::new(500, "internal", e.to_string()))?
        .map(Json)
}

fn parse_id(raw: &str) -> Result<u64, ApiError> {
    raw.parse().map_err(|_| ApiError::bad_request(format!("`{raw}` is not a trial id")))
}

async fn list_trials(State(s): State<AppState>) -> Result<Json<Value>, ApiError> {
    run(&s, Command::ListTrials).await
}

async fn get_trial(State(s): State<AppState>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    run(&s, Command::GetTrial(parse_id(&id)?)).await
}

async fn submit_trial(State(s): State<AppState>, body: Bytes) -> Result<(StatusCode, Json<Value>), ApiError> {
    let manifest = parse_body(&body).map_err(|e| ApiError::new(400, "malformed_manifest", e.message))?;
    Ok((StatusCode::CREATED, run(&s, Command::SubmitTrial(manifest)).await?))
}

async fn abort_trial(State(s): State<AppState>, Path(id): Path<String>, body: Bytes) -> Result<Json<Value>, ApiError> {
    let id = parse_id(&id)?;
    let b: AbortBody = if body.iter().all(u8::is_ascii_whitespace) {
        AbortBody::default()
    } else {
        parse_body(&body)?
    };
    run(&s, Command::AbortTrial { id, reason: b.reason }).await
}

async fn reorder(State(s): State<AppState>, body: Bytes) -> Result<Json<Value>, ApiError> {
    let b: ReorderBody = parse_body(&body)?;
    run(&s, Command::ReorderQueue(b.order)).await
}

async fn journal(State(s): State<AppState>) -> Result<Json<Value>, ApiError> {
    run(&s, Command::ShowJournal).await
}

async fn steering(State(s): State<AppState>, body: Bytes) -> Result<Json<Value>, ApiError> {
    let b: SteeringBody = parse_body(&body)?;
    run(
        &s,
        Command::AddSteering {
            persona: b.persona,
            text: b.text,
        },
    )
    .await
}

async fn show_steering(State(s): State<AppState>, Path(persona): Path<String>) -> Result<Json<Value>, ApiError> {
    let persona = persona.parse().map_err(|e: String| ApiError::new(404, "not_found", e))?;
    run(&s, Command::ShowSteering(persona)).await
}

async fn experiment_metrics(State(s): State<AppState>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let id = id
        .parse()
        .map_err(|_| ApiError::bad_request(format!("`{id}` is not an experiment id")))?;
    run(&s, Command::ExperimentMetrics(id)).await
}

async fn healthz(State(s): State<AppState>) -> Json<Value> {
    let service = s.service.clone();
    let (tick, trials) = tokio::task::spawn_blocking(move || {
        let g = service.lock().unwrap_or_else(|e| e.into_inner());
        (g.orch.tick_count(), g.orch.trials().count())
    })
    .await
    .unwrap_or_default();
    Json(json!({ "status": "ok", "tick": tick, "trials": trials }))
}

async fn auth(State(s): State<AppState>, req: Request, next: Next) -> Response {
    if let Some(token) = &s.token {
        let ok = req.uri().path() == "/healthz"
            || req
                .headers()
                .get(header::AUTHORIZATION)
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.strip_prefix("Bearer "))
                .is_some_and(|t| t == &**token);
        if !ok {
            return ApiError::new(401, "unauthorized", "missing or wrong bearer token").into_response();
        }
    }
    next.run(req).await
}

async fn fallback(method: Method) -> ApiError {
    ApiError::new(404, "not_found", format!("no route for {method} on this path"))
}

/// The API router. With a token, every route but `/healthz` requires
/// `Authorization: Bearer <token>`.
pub fn router(service: Shared, token: Option<String>) -> Router {
    let state = AppState {
        service,
        token: token.map(Arc::from),
    };
    Router::new()
        .route("/trials", get(list_trials).post(submit_trial))
        .route("/trials/{id}", get(get_trial))
        .route("/trials/{id}/abort", post(abort_trial))
        .route("/queue/reorder", post(reorder))
        .route("/journal", get(journal))
        .route("/steering", post(steering))
        .route("/steering/{persona}", get(show_steering))
        .route("/experiments/{id}/metrics", get(experiment_metrics))
        .route("/healthz", get(healthz))
        .fallback(fallback)
        .layer(middleware::from_fn_with_state(state.clone(), auth))
        .with_state(state)
}

/// Ticks the shared service every `interval` until stopped.
pub struct Ticker {
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl Ticker {
    pub fn start(service: Shared, env: Arc<dyn TrialEnv + Send + Sync>, interval: Duration) -> Self {
        let stop = Arc::new(AtomicBool::new(false));
        let flag = stop.clone();
        let handle = std::thread::spawn(move || {
            while !flag.load(Ordering::Relaxed) {
                std::thread::sleep(interval);
                if flag.load(Ordering::Relaxed) {
                    break;
                }
                let mut g = service.lock().unwrap_or_else(|e| e.into_inner());
                if let Err(e) = g.tick(env.as_ref()) {
                    tracing::error!("tick failed: {e}");
                }
            }
        });
        Self {
            stop,
            handle: Some(handle),
        }
    }
}

impl Drop for Ticker {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}
