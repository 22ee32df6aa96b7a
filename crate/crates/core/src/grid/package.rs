//! Virtual simulation engine packages.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{sha256_hex, GridError, SimulationTask};
use crate::compiler::{compile, DeviceProfile, ScheduleProgram};
use crate::exec::{emit_source, execute_parallel, interpret, ExecutionContext};
use crate::model::{parse_model, validate, Strategy};
use crate::waveform::WaveformSet;

pub const MANIFEST: &str = "manifest.json";
pub const SCHEDULE: &str = "schedule.cgm";
pub const SOURCE: &str = "engine.c";
pub const STATE: &str = "state.txt";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub task_id: String,
    pub device_profile: String,
    pub strategy: String,
    pub steps: usize,
    /// File name to SHA-256.
    pub files: BTreeMap<String, String>,
}

/// Everything a worker needs to run one task, with no reference back to
/// the store that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct VSEPackage {
    pub manifest: Manifest,
    pub schedule: String,
    pub source: Option<String>,
    pub state: String,
}

/// Parses, validates and compiles the task. Failures carry the debug form
/// of the underlying error so the variant name survives into the record.
pub fn assemble_vse(task: &SimulationTask) -> Result<VSEPackage, GridError> {
    let fail = |m: String| GridError::CompilationFailed(m);
    let model = parse_model(&task.document).map_err(|e| fail(format!("{e:?}")))?;
    let report = validate(&model);
    if report.has_errors() {
        let issues: Vec<String> = report.issues.iter().map(|i| format!("{:?} {}: {}", i.code, i.subject, i.message)).collect();
        return Err(fail(issues.join("; ")));
    }
    let profile = DeviceProfile::lookup(&task.device_profile).map_err(|e| fail(format!("{e:?}")))?;
    let (program, _) = compile(&model, &profile, None).map_err(|e| fail(format!("{e:?}")))?;
    let schedule = program.to_text();
    let source = emit_source(&program, "c99").map_err(|e| fail(format!("{e:?}")))?;
    let state = ExecutionContext::new(program.clone()).snapshot();
    let mut files = BTreeMap::new();
    files.insert(SCHEDULE.to_string(), sha256_hex(schedule.as_bytes()));
    files.insert(SOURCE.to_string(), sha256_hex(source.as_bytes()));
    files.insert(STATE.to_string(), sha256_hex(state.as_bytes()));
    Ok(VSEPackage {
        manifest: Manifest {
            task_id: task.id.clone(),
            device_profile: task.device_profile.clone(),
            strategy: task.strategy.clone(),
            steps: program.steps,
            files,
        },
        schedule,
        source: Some(source),
        state,
    })
}

impl VSEPackage {
    pub fn write(&self, dir: &Path) -> Result<(), GridError> {
        fs::create_dir_all(dir)?;
        let manifest = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        fs::write(dir.join(MANIFEST), manifest + "\n")?;
        fs::write(dir.join(SCHEDULE), &self.schedule)?;
        fs::write(dir.join(STATE), &self.state)?;
        if let Some(src) = &self.source {
            fs::write(dir.join(SOURCE), src)?;
        }
        Ok(())
    }

    /// Loads a package and checks every listed file against its checksum.
    pub fn read(dir: &Path) -> Result<Self, GridError> {
        let text = fs::read_to_string(dir.join(MANIFEST))?;
        let manifest: Manifest =
            serde_json::from_str(&text).map_err(|e| GridError::Package(format!("{MANIFEST}: {e}")))?;
        let load = |name: &str| -> Result<Option<String>, GridError> {
            let Some(want) = manifest.files.get(name) else { return Ok(None) };
            let body = fs::read_to_string(dir.join(name))?;
            if &sha256_hex(body.as_bytes()) != want {
                return Err(GridError::Checksum(name.to_string()));
            }
            Ok(Some(body))
        };
        let schedule = load(SCHEDULE)?.ok_or_else(|| GridError::Package(format!("no {SCHEDULE}")))?;
        let state = load(STATE)?.ok_or_else(|| GridError::Package(format!("no {STATE}")))?;
        let source = load(SOURCE)?;
        Ok(VSEPackage { manifest, schedule, source, state })
    }

    /// Runs the package from its stored state for the manifest step count.
    pub fn run(&self) -> Result<WaveformSet, GridError> {
        let program = ScheduleProgram::parse(&self.schedule).map_err(|e| GridError::Package(e.to_string()))?;
        let mut ctx = ExecutionContext::restore(program, &self.state).map_err(|e| GridError::Package(e.to_string()))?;
        let steps = self.manifest.steps.saturating_sub(ctx.step);
        let res = match Strategy::parse(&self.manifest.strategy) {
            Some(Strategy::LayerParallel) => {
                let workers = DeviceProfile::builtin(&self.manifest.device_profile).map_or(1, |p| p.workers.max(1));
                execute_parallel(&mut ctx, workers, steps)
            }
            _ => interpret(&mut ctx, steps),
        };
        res.map_err(|e| GridError::Package(e.to_string()))
    }
}

/// Reads, verifies and runs the package in `dir`.
pub fn run_package(dir: &Path) -> Result<WaveformSet, GridError> {
    VSEPackage::read(dir)?.run()
}
