//! HTTP API consumed by the operator console.
//!
//! | method | path | |
//! |---|---|---|
//! | GET | `/scenarios` | bundled scenario summaries |
//! | GET | `/scenarios/{name}` | one scenario with its file text |
//! | POST | `/sessions` | start a session: `{"scenario": "t1"}` or `{"scenario_text": "..."}` |
//! | GET | `/sessions/{id}` | session state |
//! | POST | `/sessions/{id}/constraints` | replan with constraint text; `?mode=async` returns 202 |
//!
//! Every JSON body carries `format_version`.

use std::sync::Arc;

use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use resplan::domain::World;
use resplan::prefs::{self, PrefsError};
use resplan::scenarios::{self, Scenario, ScenarioError};
use serde::{Deserialize, Serialize};

use crate::sessions::{self, SessionError, Store};

pub const FORMAT_VERSION: &str = "v1";
pub const CONSTRAINTS_LIMIT: usize = 64 * 1024;

pub struct AppState {
    pub store: Store,
}

#[derive(Serialize)]
struct Envelope<T> {
    format_version: &'static str,
    #[serde(flatten)]
    body: T,
}

fn ok<T: Serialize>(status: StatusCode, body: T) -> Response {
    (
        status,
        Json(Envelope {
            format_version: FORMAT_VERSION,
            body,
        }),
    )
        .into_response()
}

#[derive(Serialize)]
struct ErrorBody {
    error: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    line: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    column: Option<usize>,
}

pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, error: impl ToString) -> Self {
        ApiError {
            status,
            body: ErrorBody {
                error: error.to_string(),
                line: None,
                column: None,
            },
        }
    }

    fn at(status: StatusCode, error: impl ToString, pos: Option<resplan::sexpr::Pos>) -> Self {
        let mut e = ApiError::new(status, error);
        e.body.line = pos.map(|p| p.line);
        e.body.column = pos.map(|p| p.column);
        e
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        ok(self.status, self.body)
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let status = match &e {
            SessionError::NotFound(_) => StatusCode::NOT_FOUND,
            SessionError::Busy(_) => StatusCode::CONFLICT,
            SessionError::Scenario(_) => StatusCode::UNPROCESSABLE_ENTITY,
            SessionError::Io(_) | SessionError::Corrupt(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        match e {
            SessionError::Scenario(inner) => scenario_error(inner),
            other => ApiError::new(status, other),
        }
    }
}

fn scenario_error(e: ScenarioError) -> ApiError {
    let pos = e.pos();
    ApiError::at(StatusCode::UNPROCESSABLE_ENTITY, e, pos)
}

fn prefs_error(e: PrefsError) -> ApiError {
    let pos = e.pos();
    ApiError::at(StatusCode::UNPROCESSABLE_ENTITY, e, Some(pos))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/scenarios", get(list_scenarios))
        .route("/scenarios/{name}", get(get_scenario))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route(
            "/sessions/{id}/constraints",
            post(post_constraints).layer(DefaultBodyLimit::max(CONSTRAINTS_LIMIT)),
        )
        .with_state(state)
}

/// Serve on `0.0.0.0:port` until the process is stopped.
pub fn serve(port: u16) -> std::io::Result<()> {
    let state = Arc::new(AppState {
        store: Store::from_env()?,
    });
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
        eprintln!(
            "resplan: listening on port {port}, sessions in {}",
            state.store.root().display()
        );
        axum::serve(listener, router(state)).await
    })
}

#[derive(Serialize)]
struct ScenarioSummary {
    name: String,
    title: String,
    uavs: usize,
    targets: usize,
    goals: Vec<String>,
}

fn summary(s: &Scenario) -> ScenarioSummary {
    ScenarioSummary {
        name: s.name.clone(),
        title: s.title.clone(),
        uavs: s.world.uavs().len(),
        targets: s.world.targets().len(),
        goals: s.world.goals().iter().map(|g| s.world.goal_id(*g)).collect(),
    }
}

#[derive(Serialize)]
struct ScenarioList {
    scenarios: Vec<ScenarioSummary>,
}

async fn list_scenarios() -> Response {
    ok(
        StatusCode::OK,
        ScenarioList {
            scenarios: scenarios::bundled().iter().map(summary).collect(),
        },
    )
}

#[derive(Serialize)]
struct ScenarioDetail {
    #[serde(flatten)]
    summary: ScenarioSummary,
    world: World,
    update: String,
    text: String,
    reference_constraints: String,
}

async fn get_scenario(Path(name): Path<String>) -> Result<Response, ApiError> {
    let s = scenarios::bundled_named(&name)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("no scenario `{name}`")))?;
    let mut file = s.clone();
    file.reference_constraints = Default::default();
    Ok(ok(
        StatusCode::OK,
        ScenarioDetail {
            summary: summary(&s),
            world: s.world.clone(),
            update: s.update.text.clone(),
            text: scenarios::render(&file),
            reference_constraints: prefs::render_with(&s.reference_constraints, &s.world, s.weights()),
        },
    ))
}

#[derive(Deserialize)]
struct NewSession {
    scenario: Option<String>,
    scenario_text: Option<String>,
}

async fn create_session(State(state): State<Arc<AppState>>, Json(req): Json<NewSession>) -> Result<Response, ApiError> {
    let scenario = match (req.scenario, req.scenario_text) {
        (Some(name), None) => scenarios::bundled_named(&name)
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("no scenario `{name}`")))?,
        (None, Some(text)) => scenarios::parse(&text).map_err(scenario_error)?,
        _ => {
            return Err(ApiError::new(
                StatusCode::BAD_REQUEST,
                "give exactly one of `scenario` or `scenario_text`",
            ))
        }
    };
    let id = uuid::Uuid::new_v4().to_string();
    let session = tokio::task::spawn_blocking(move || sessions::start(&scenario, id))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e))??;
    let session = state.store.insert(session)?;
    Ok(ok(StatusCode::CREATED, session))
}

async fn get_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(ok(StatusCode::OK, state.store.get(&id)?))
}

#[derive(Deserialize)]
struct ConstraintQuery {
    mode: Option<String>,
}

async fn post_constraints(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<ConstraintQuery>,
    text: String,
) -> Result<Response, ApiError> {
    let asynchronous = match q.mode.as_deref() {
        None | Some("sync") => false,
        Some("async") => true,
        Some(other) => {
            return Err(ApiError::new(
                StatusCode::BAD_REQUEST,
                format!("unknown mode `{other}`, expected sync or async"),
            ))
        }
    };
    let session = state.store.get(&id)?;
    let scenario = scenarios::parse(&session.scenario_text).map_err(|e| {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, format!("stored scenario: {e}"))
    })?;
    let constraints = scenario.parse_constraints(&text).map_err(prefs_error)?;
    scenario
        .operator_preferences
        .merged(&constraints)
        .map_err(prefs_error)?;
    let running = state.store.begin(&id, &text)?;

    let work = {
        let state = state.clone();
        let id = id.clone();
        move || {
            let result = sessions::replan(&scenario, &constraints);
            state.store.finish(&id, result)
        }
    };
    if asynchronous {
        tokio::task::spawn_blocking(work);
        return Ok(ok(StatusCode::ACCEPTED, running));
    }
    let done = tokio::task::spawn_blocking(work)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e))??;
    Ok(ok(StatusCode::OK, done))
}
