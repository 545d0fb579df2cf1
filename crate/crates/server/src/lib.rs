//! HTTP facade over a [`Session`].
//!
//! The session is built once (calibration included) and then only read. Until it is
//! ready every endpoint answers 503, so the listener can be bound before the
//! permutations finish.
//!
//! | route | |
//! |---|---|
//! | `GET /api/meta` | sizes, level, calibrated templates and their `lambda` |
//! | `GET /api/points` | `{id, p, log_fc}` per hypothesis (two-sample sessions only) |
//! | `POST /api/bound` | bound for one selection |
//! | `GET /api/envelope?method=` | envelope arrays over the p-value level sets |

use std::net::SocketAddr;
use std::path::Path;
use std::sync::{Arc, OnceLock};

use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use posthoc::{Error, Method, SelectionSpec, Session, TemplateKind};
use serde::Deserialize;
use serde_json::json;
use tower_http::cors::CorsLayer;
use tower_http::services::ServeDir;

#[derive(Debug, Default)]
pub struct AppState {
    session: OnceLock<Arc<Session>>,
    failure: OnceLock<String>,
}

pub type SharedState = Arc<AppState>;

impl AppState {
    pub fn pending() -> SharedState {
        Arc::new(Self::default())
    }

    pub fn ready(session: Session) -> SharedState {
        let state = Self::pending();
        state.install(session);
        state
    }

    /// Publishes the session; later calls are ignored.
    pub fn install(&self, session: Session) {
        let _ = self.session.set(Arc::new(session));
    }

    pub fn fail(&self, message: impl Into<String>) {
        let _ = self.failure.set(message.into());
    }

    pub fn session(&self) -> Option<&Arc<Session>> {
        self.session.get()
    }
}

pub struct ApiError {
    status: StatusCode,
    body: serde_json::Value,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, body: json!({ "error": message.into() }) }
    }
}

impl From<Error> for ApiError {
    fn from(err: Error) -> Self {
        match &err {
            Error::UnknownIds(ids) => Self {
                status: StatusCode::BAD_REQUEST,
                body: json!({ "error": err.to_string(), "unknown_ids": ids }),
            },
            _ => Self::new(StatusCode::BAD_REQUEST, err.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn current(state: &AppState) -> Result<Arc<Session>, ApiError> {
    if let Some(s) = state.session() {
        return Ok(s.clone());
    }
    Err(match state.failure.get() {
        Some(msg) => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, format!("session failed to initialize: {msg}")),
        None => ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "session is still calibrating"),
    })
}

fn parse_method(method: Option<&str>, template: Option<&str>) -> Result<Method, ApiError> {
    let mut parsed: Method = method.unwrap_or("simes").parse()?;
    if let Some(t) = template {
        let kind: TemplateKind = t.parse()?;
        match &mut parsed {
            Method::Calibrated { template } => *template = Some(kind),
            _ => return Err(ApiError::new(StatusCode::BAD_REQUEST, format!("template '{t}' only applies to calibrated methods"))),
        }
    }
    Ok(parsed)
}

async fn meta(State(state): State<SharedState>) -> ApiResult<posthoc::session::Meta> {
    Ok(Json(current(&state)?.meta()))
}

async fn points(State(state): State<SharedState>) -> ApiResult<Vec<posthoc::session::Point>> {
    current(&state)?
        .points()
        .map(Json)
        .map_err(|e| ApiError::new(StatusCode::NOT_FOUND, e.to_string()))
}

/// A selection given either as a bare list of ids or as a filter object.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum SelectionInput {
    Ids(Vec<String>),
    Spec(SelectionSpec),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundRequest {
    #[serde(default)]
    pub selection: Option<SelectionInput>,
    #[serde(default)]
    pub method: Option<String>,
    #[serde(default)]
    pub template: Option<String>,
}

async fn bound(State(state): State<SharedState>, Json(req): Json<BoundRequest>) -> ApiResult<posthoc::BoundAnswer> {
    let session = current(&state)?;
    let method = parse_method(req.method.as_deref(), req.template.as_deref())?;
    let spec = match req.selection {
        None => SelectionSpec::all(),
        Some(SelectionInput::Ids(ids)) => SelectionSpec { ids: Some(ids), ..Default::default() },
        Some(SelectionInput::Spec(spec)) => spec,
    };
    Ok(Json(session.bound(method, &spec)?))
}

#[derive(Debug, Deserialize)]
pub struct EnvelopeQuery {
    pub method: Option<String>,
    pub template: Option<String>,
}

async fn envelope(
    State(state): State<SharedState>,
    Query(q): Query<EnvelopeQuery>,
) -> ApiResult<posthoc::EnvelopeReport> {
    let session = current(&state)?;
    let method = parse_method(q.method.as_deref(), q.template.as_deref())?;
    let report = tokio::task::spawn_blocking(move || session.envelope(method))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok(Json(report))
}

/// Routes with permissive CORS; `static_dir`, when given, serves the UI assets for every other path.
pub fn router(state: SharedState, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/api/meta", get(meta))
        .route("/api/points", get(points))
        .route("/api/bound", post(bound))
        .route("/api/envelope", get(envelope))
        .with_state(state);
    let app = match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    };
    app.layer(CorsLayer::permissive())
}

/// Binds `addr`, builds the session on a blocking thread and serves until the process ends.
pub async fn run<F>(addr: SocketAddr, static_dir: Option<&Path>, build: F) -> std::io::Result<()>
where
    F: FnOnce() -> posthoc::Result<Session> + Send + 'static,
{
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let state = AppState::pending();
    let init = state.clone();
    tokio::task::spawn_blocking(move || match build() {
        Ok(session) => init.install(session),
        Err(e) => init.fail(e.to_string()),
    });
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state, static_dir)).await
}
