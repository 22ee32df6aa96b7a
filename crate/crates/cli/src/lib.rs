//! Shared pieces of the `emtgrid` binary: the HTTP service and the
//! helpers its subcommands use.

use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use emtgrid_core::grid::{Grid, GridConfig, GridError, InProcessRunner, ProcessRunner, Runner, WorkerSlot};
use serde_json::json;

pub const DATA_DIR_VAR: &str = "EMTGRID_DATA_DIR";

/// `EMTGRID_DATA_DIR`, or `./emtgrid-data`.
pub fn data_dir() -> PathBuf {
    std::env::var_os(DATA_DIR_VAR).map_or_else(|| PathBuf::from("emtgrid-data"), PathBuf::from)
}

/// Parses `profile[:capacity],...`, e.g. `cpu-serial:2,cpu-parallel`.
/// Slot ids are `slot0`, `slot1`, ... in list order.
pub fn parse_slots(spec: &str) -> Result<Vec<WorkerSlot>> {
    let mut out = Vec::new();
    for (i, part) in spec.split(',').map(str::trim).filter(|p| !p.is_empty()).enumerate() {
        let (profile, cap) = match part.rsplit_once(':') {
            Some((p, c)) => (p, c.parse::<usize>().with_context(|| format!("slot `{part}`: bad capacity"))?),
            None => (part, 1),
        };
        if cap == 0 {
            bail!("slot `{part}`: capacity must be at least 1");
        }
        out.push(WorkerSlot::new(format!("slot{i}"), profile, cap));
    }
    if out.is_empty() {
        bail!("no worker slots given");
    }
    Ok(out)
}

/// Comma-separated list of values.
pub fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse::<T>().map_err(|e| anyhow::anyhow!("`{p}`: {e}")))
        .collect()
}

/// Opens the grid; workers are separate `emtgrid vse-run` processes
/// unless `in_process` is set.
pub fn open_grid(dir: PathBuf, slots: Vec<WorkerSlot>, in_process: bool) -> Result<Grid> {
    let runner: Arc<dyn Runner> = if in_process {
        Arc::new(InProcessRunner)
    } else {
        Arc::new(ProcessRunner { program: std::env::current_exe().context("locating own executable")? })
    };
    Grid::open(GridConfig { data_dir: dir.clone(), slots }, runner)
        .with_context(|| format!("opening grid store {}", dir.display()))
}

struct ApiError(GridError);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self.0 {
            GridError::UnknownTask(_) => StatusCode::NOT_FOUND,
            GridError::NotFinished { .. } => StatusCode::CONFLICT,
            GridError::Document(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(json!({ "error": self.0.to_string() }))).into_response()
    }
}

async fn submit(State(g): State<Grid>, body: String) -> Result<Response, ApiError> {
    let id = g.submit(&body).map_err(ApiError)?;
    g.pump();
    Ok((StatusCode::CREATED, Json(json!({ "id": id }))).into_response())
}

async fn status(State(g): State<Grid>, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(Json(g.status(&id).map_err(ApiError)?).into_response())
}

async fn result(State(g): State<Grid>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let csv = g.result_csv(&id).map_err(ApiError)?;
    Ok(([(header::CONTENT_TYPE, "text/csv")], csv).into_response())
}

async fn slots(State(g): State<Grid>) -> Response {
    Json(g.slots()).into_response()
}

/// `POST /tasks`, `GET /tasks/{id}`, `GET /tasks/{id}/result`, `GET /slots`.
pub fn router(grid: Grid) -> Router {
    Router::new()
        .route("/tasks", post(submit))
        .route("/tasks/{id}", get(status))
        .route("/tasks/{id}/result", get(result))
        .route("/slots", get(slots))
        .with_state(grid)
}
