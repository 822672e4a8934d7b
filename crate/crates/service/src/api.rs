//! Routes. Every engine call that can touch an objective runs on the
//! blocking pool.

use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use bomuse_core::{
    AgentSpec, BatchRecord, BoundViolation, Bounds, Error, Mode, ObjectiveConfig, Session, SessionConfig, Source,
};
use serde::{Deserialize, Serialize};

use crate::store::{Phase, SessionState, Store, StoreError};

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    violations: Option<Vec<BoundViolation>>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, message: message.into(), violations: None }
    }

    fn conflict(message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, message)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Input(_) | Error::Dimension { .. } | Error::Domain { .. } | Error::Unsupported(_) => {
                StatusCode::BAD_REQUEST
            }
            Error::OutOfBounds(_) => StatusCode::UNPROCESSABLE_ENTITY,
            Error::Pending | Error::Finished(_) => StatusCode::CONFLICT,
            Error::Objective(_) => StatusCode::BAD_GATEWAY,
            Error::Factorization { .. } | Error::Numerical(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let violations = match &e {
            Error::OutOfBounds(v) => Some(v.clone()),
            _ => None,
        };
        Self { status, message: e.to_string(), violations }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let status = match e {
            StoreError::Exists(_) => StatusCode::CONFLICT,
            StoreError::NotFound(_) => StatusCode::NOT_FOUND,
            StoreError::BadId(_) => StatusCode::BAD_REQUEST,
            StoreError::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.to_string())
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    violations: Option<&'a [BoundViolation]>,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            tracing::error!(status = %self.status, "{}", self.message);
        }
        let body = ErrorBody { error: &self.message, violations: self.violations.as_deref() };
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, format!("worker failed: {e}")))?
}

/// Either a full config or the short form for a built-in benchmark.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CreateRequest {
    #[serde(default)]
    pub id: Option<String>,
    #[serde(default)]
    pub config: Option<SessionConfig>,
    #[serde(default)]
    pub benchmark: Option<String>,
    #[serde(default)]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub num_init: Option<usize>,
    /// BO-Muse batch count; other modes get the same number of evaluations.
    #[serde(default)]
    pub batches: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Replace the simulated expert with a person posting points.
    #[serde(default)]
    pub live_human: bool,
    #[serde(default)]
    pub reveal_truth: bool,
}

/// Server-wide settings applied to short-form create requests.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Defaults {
    pub delta: Option<f64>,
    pub zeta: Option<f64>,
    /// Observation noise standard deviation in objective units.
    pub sigma: Option<f64>,
}

impl CreateRequest {
    pub fn into_config(self) -> bomuse_core::Result<SessionConfig> {
        self.into_config_with(&Defaults::default())
    }

    /// Full configs pass through untouched; `defaults` fill in the short form.
    pub fn into_config_with(self, defaults: &Defaults) -> bomuse_core::Result<SessionConfig> {
        if let Some(c) = self.config {
            return Ok(c);
        }
        let name = self.benchmark.ok_or_else(|| Error::Input("give either 'config' or 'benchmark'".into()))?;
        let mode = self.mode.unwrap_or(Mode::BoMuse);
        let mut c = SessionConfig::for_benchmark(&name, mode, self.num_init.unwrap_or(3), self.batches.unwrap_or(10), self.seed.unwrap_or(0))?;
        if let Some(sigma) = defaults.sigma {
            let range = ObjectiveConfig::builtin(&name).instantiate()?.range_estimate().unwrap_or(1.0);
            c = c.with_noise_std(sigma, range);
        }
        if let Some(z) = defaults.zeta {
            c.zeta = z;
        }
        if let Some(d) = defaults.delta {
            c.delta = d;
        }
        if self.live_human {
            c.human_agent = AgentSpec::live_human(c.human_agent.noise_variance);
        }
        c.reveal_truth = self.reveal_truth;
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationView {
    pub s: usize,
    pub t: usize,
    pub source: Source,
    pub x: Vec<f64>,
    pub y: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_true: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleView {
    pub gamma: f64,
    pub b: f64,
    /// Trade-off the BO-Muse AI would use next.
    pub beta_next: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub phase: Phase,
    pub mode: Mode,
    pub objective: String,
    pub bounds: Bounds<f64>,
    pub next_batch: usize,
    pub budget_batches: usize,
    pub observations: Vec<ObservationView>,
    pub records: Vec<BatchRecord>,
    /// Best observed (noisy) point so far.
    pub best: Option<ObservationView>,
    pub schedule: ScheduleView,
    pub pending_human: Option<Vec<f64>>,
    pub truth_revealed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simple_regret: Option<Vec<f64>>,
}

impl SessionView {
    pub fn build(state: &SessionState, session: &Session) -> Self {
        let reveal = state.config.reveal_truth;
        let view = |p: &bomuse_core::engine::EvaluatedPoint| ObservationView {
            s: p.s,
            t: p.t,
            source: p.source,
            x: p.x.clone(),
            y: p.y,
            f_true: reveal.then_some(p.f_true),
        };
        let observations: Vec<ObservationView> = state.data.observations.iter().map(view).collect();
        let sign: f64 = session.objective().goal().sign();
        let best = observations
            .iter()
            .fold(None::<&ObservationView>, |b, o| match b {
                Some(b) if sign * b.y >= sign * o.y => Some(b),
                _ => Some(o),
            })
            .cloned();
        let sched = state.data.schedule;
        Self {
            id: state.id.clone(),
            phase: state.phase,
            mode: state.config.mode,
            objective: session.objective().name().to_string(),
            bounds: session.bounds().clone(),
            next_batch: session.next_batch(),
            budget_batches: state.config.budget_batches,
            observations,
            records: state.data.records.clone(),
            best,
            schedule: ScheduleView { gamma: sched.running_gamma, b: sched.running_b, beta_next: sched.beta() },
            pending_human: state.pending_human.clone(),
            truth_revealed: reveal,
            simple_regret: if reveal { session.regret().simple_regret } else { None },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuggestionRequest {
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdvanceResponse {
    pub record: BatchRecord,
    pub session: SessionView,
}

pub struct AppState {
    pub store: Arc<Store>,
    pub defaults: Defaults,
}

pub fn router(store: Arc<Store>) -> Router {
    router_with(store, Defaults::default())
}

pub fn router_with(store: Arc<Store>, defaults: Defaults) -> Router {
    Router::new()
        .route("/healthz", get(|| async { "ok" }))
        .route("/sessions", post(create).get(list))
        .route("/sessions/{id}", get(status))
        .route("/sessions/{id}/suggestion", post(suggestion))
        .route("/sessions/{id}/advance", post(advance))
        .route("/sessions/{id}/export.csv", get(export))
        .with_state(Arc::new(AppState { store, defaults }))
}

async fn list(State(app): State<Arc<AppState>>) -> Json<Vec<String>> {
    Json(app.store.ids())
}

async fn create(State(app): State<Arc<AppState>>, Json(req): Json<CreateRequest>) -> ApiResult<(StatusCode, Json<SessionView>)> {
    let store = app.store.clone();
    let id = req.id.clone().unwrap_or_else(|| uuid::Uuid::new_v4().simple().to_string());
    if !crate::store::valid_id(&id) {
        return Err(StoreError::BadId(id).into());
    }
    if store.contains(&id) {
        return Err(StoreError::Exists(id).into());
    }
    let view = blocking(move || {
        let config = req.into_config_with(&app.defaults)?;
        let session = Session::new(config)?;
        let state = store.insert(SessionState::new(id, &session))?;
        Ok(SessionView::build(&state, &session))
    })
    .await?;
    Ok((StatusCode::CREATED, Json(view)))
}

async fn status(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<SessionView>> {
    let state = app.store.get(&id)?.snapshot();
    blocking(move || {
        let session = state.session()?;
        Ok(Json(SessionView::build(&state, &session)))
    })
    .await
}

async fn suggestion(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(req): Json<SuggestionRequest>,
) -> ApiResult<Json<SessionView>> {
    let store = app.store.clone();
    let slot = store.get(&id)?;
    let _writer = slot.writer.lock().await;
    let state = slot.snapshot();
    match state.phase {
        Phase::AwaitingHuman => {}
        Phase::Finished => return Err(Error::Finished(state.config.budget_batches).into()),
        Phase::AwaitingAdvance if state.pending_human.is_some() => {
            return Err(ApiError::conflict("a suggestion for this batch is already posted"))
        }
        Phase::AwaitingAdvance => return Err(ApiError::conflict("this session's human agent is not live")),
    }
    let slot2 = slot.clone();
    blocking(move || {
        let session = state.session()?;
        session.bounds().check(&req.x)?;
        let mut next = (*state).clone();
        next.pending_human = Some(req.x);
        next.phase = next.phase_for(&session);
        next.touch();
        let committed = store.commit(&slot2, next)?;
        Ok(Json(SessionView::build(&committed, &session)))
    })
    .await
}

async fn advance(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<AdvanceResponse>> {
    let store = app.store.clone();
    let slot = store.get(&id)?;
    let _writer = slot.writer.lock().await;
    let state = slot.snapshot();
    match state.phase {
        Phase::Finished => return Err(Error::Finished(state.config.budget_batches).into()),
        Phase::AwaitingHuman => return Err(ApiError::conflict("waiting for the human's suggestion")),
        Phase::AwaitingAdvance => {}
    }
    let slot2 = slot.clone();
    blocking(move || {
        let mut session = state.session()?;
        let record = session.run_batch(state.pending_human.clone())?;
        let mut next = (*state).clone();
        next.data = session.data().clone();
        next.pending_human = None;
        next.phase = next.phase_for(&session);
        next.touch();
        let committed = store.commit(&slot2, next)?;
        Ok(Json(AdvanceResponse { record, session: SessionView::build(&committed, &session) }))
    })
    .await
}

async fn export(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let state = app.store.get(&id)?.snapshot();
    let csv = blocking(move || {
        let session = state.session()?;
        Ok(session.export_csv(state.config.reveal_truth))
    })
    .await?;
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], csv).into_response())
}
