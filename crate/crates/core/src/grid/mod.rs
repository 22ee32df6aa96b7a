//! Task grid: packaging, dispatch, persistence and rental cost.
//!
//! A submitted document becomes a [`SimulationTask`] whose id is the
//! SHA-256 of its canonical JSON. Building a task produces a
//! [`VSEPackage`], a self-sufficient directory that a [`Runner`] executes
//! in a separate worker. The [`Grid`] owns the queue and the worker slots,
//! records every state transition in an append-only journal and keeps
//! documents and waveforms in a content-addressed blob store.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

mod orchestrator;
mod package;
mod store;

pub use orchestrator::{dispatch, Grid, GridConfig, InProcessRunner, ProcessRunner, Runner};
pub use package::{assemble_vse, run_package, Manifest, VSEPackage};
pub use store::{BlobStore, Journal, JournalEvent};

#[derive(Debug, Error)]
pub enum GridError {
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("task `{id}` is {state}, not done")]
    NotFinished { id: String, state: TaskState },
    #[error("cost inputs must be positive")]
    NonPositiveInput,
    #[error("document is not valid JSON: {0}")]
    Document(String),
    #[error("build failed: {0}")]
    CompilationFailed(String),
    #[error("package checksum mismatch for `{0}`")]
    Checksum(String),
    #[error("package: {0}")]
    Package(String),
    #[error("journal line {line}: {message}")]
    Journal { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// A task as submitted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationTask {
    pub id: String,
    pub document: String,
    pub device_profile: String,
    pub strategy: String,
    /// Seconds since the Unix epoch.
    pub submitted: u64,
}

impl SimulationTask {
    /// Parses the JSON envelope only; model errors surface when the task is
    /// built. The id hashes the document with object keys sorted, so
    /// formatting and key order do not matter.
    pub fn from_document(document: &str) -> Result<Self, GridError> {
        let v: serde_json::Value = serde_json::from_str(document).map_err(|e| GridError::Document(e.to_string()))?;
        let canonical = serde_json::to_string(&v).expect("JSON value serializes");
        let task = v.get("task");
        let field = |k: &str, d: &str| {
            task.and_then(|t| t.get(k)).and_then(|x| x.as_str()).unwrap_or(d).to_string()
        };
        let submitted = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        Ok(SimulationTask {
            id: sha256_hex(canonical.as_bytes()),
            document: canonical,
            device_profile: field("device_profile", "cpu-serial"),
            strategy: field("strategy", "serial"),
            submitted,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskState {
    Queued,
    Building,
    Running,
    Done,
    Failed,
}

impl TaskState {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskState::Queued => "queued",
            TaskState::Building => "building",
            TaskState::Running => "running",
            TaskState::Done => "done",
            TaskState::Failed => "failed",
        }
    }

    /// Allowed forward transitions.
    pub fn can_become(self, next: TaskState) -> bool {
        use TaskState::*;
        matches!(
            (self, next),
            (Queued, Building) | (Building, Running) | (Building, Failed) | (Running, Done) | (Running, Failed)
        )
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, TaskState::Done | TaskState::Failed)
    }
}

impl std::fmt::Display for TaskState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub id: String,
    pub state: TaskState,
    pub device_profile: String,
    pub strategy: String,
    pub submitted: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slot: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub build_seconds: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub run_seconds: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    /// Why a queued task is not yet dispatched.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub waiting: Option<String>,
    /// Blob address of the waveform file once done.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkerSlot {
    pub id: String,
    pub device_profile: String,
    pub capacity: usize,
    pub assignments: Vec<String>,
}

impl WorkerSlot {
    pub fn new(id: impl Into<String>, device_profile: impl Into<String>, capacity: usize) -> Self {
        WorkerSlot { id: id.into(), device_profile: device_profile.into(), capacity, assignments: Vec::new() }
    }

    pub fn has_room(&self) -> bool {
        self.assignments.len() < self.capacity
    }
}

/// Weekly rental price of one device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub device: String,
    pub price_per_week: f64,
}

pub const HOURS_PER_WEEK: f64 = 168.0;

impl CostModel {
    pub fn estimate(&self, wall_hours: f64, devices: usize) -> Result<f64, GridError> {
        estimate_cost(self.price_per_week, wall_hours, devices)
    }
}

/// `devices * price_per_week / 168 * wall_hours`, rounded to 3 decimals.
pub fn estimate_cost(price_per_week: f64, wall_hours: f64, devices: usize) -> Result<f64, GridError> {
    if !(price_per_week > 0.0 && wall_hours > 0.0 && devices > 0) {
        return Err(GridError::NonPositiveInput);
    }
    let cost = devices as f64 * (price_per_week / HOURS_PER_WEEK) * wall_hours;
    Ok((cost * 1000.0).round() / 1000.0)
}
