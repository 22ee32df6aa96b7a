//! Computation-graph compiler.
//!
//! [`build_cgm`] turns a model into basic processes and dependency edges,
//! [`break_algebraic_loops`] inserts one-step delays into feedthrough
//! cycles, [`layer`] assigns longest-path layers, [`group_layer_processes`]
//! forms same-kind groups, [`vectorize`] widens the graph over a scenario
//! batch and [`emit_schedule`] lays out the state arena and produces the
//! schedule program.

use std::fmt;

use thiserror::Error;

use crate::model::{BlockKind, ComponentKind, ModelError, Strategy};
use crate::kernels::KernelError;

mod cgm;
mod ldag;
mod schedule;

pub use cgm::{break_algebraic_loops, build_cgm, BasicProcess, LoopRecord, LoopReport, Port, CGM};
pub use ldag::{group_layer_processes, layer, vectorize, vectorize_models, Group, ScenarioBatch, LDAG};
pub use schedule::{
    emit_schedule, CompRecord, ProcessRecord, ScheduleGroup, ScheduleParseError, ScheduleProgram,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompileError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("cycle detected among vertices {0:?} after loop breaking")]
    CycleDetected(Vec<usize>),
    #[error("scenario {scenario} changes the model topology: {detail}")]
    TopologyMismatch { scenario: usize, detail: String },
    #[error("group of {count} `{kind}` processes at width {width} exceeds capacity {capacity} of profile `{profile}`")]
    CapacityExceeded { kind: String, count: usize, width: usize, capacity: usize, profile: String },
    #[error("unknown device profile `{0}`")]
    UnknownProfile(String),
    #[error("write conflict in layer {layer}: slot {slot} touched by `{first}` and `{second}`")]
    WriteConflict { layer: usize, slot: usize, first: String, second: String },
    #[error("empty scenario batch")]
    EmptyBatch,
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Kind of a basic process. Grouping orders kinds by [`ProcessKind::id`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ProcessKind {
    Norton(ComponentKind),
    Injection,
    Factorize,
    Solve,
    Control(BlockKind),
}

const COMPONENT_KINDS: [ComponentKind; 10] = [
    ComponentKind::Resistor,
    ComponentKind::Inductor,
    ComponentKind::Capacitor,
    ComponentKind::SeriesRl,
    ComponentKind::VoltageSource,
    ComponentKind::CurrentSource,
    ComponentKind::Switch,
    ComponentKind::ControlledCurrentSource,
    ComponentKind::PvArray,
    ComponentKind::PvSubsystem,
];

const BLOCK_KINDS: [BlockKind; 9] = [
    BlockKind::Gain,
    BlockKind::Sum,
    BlockKind::Integrator,
    BlockKind::FirstOrderLag,
    BlockKind::Limiter,
    BlockKind::PiController,
    BlockKind::Comparator,
    BlockKind::Constant,
    BlockKind::Delay,
];

impl ProcessKind {
    pub fn id(self) -> usize {
        match self {
            ProcessKind::Norton(k) => COMPONENT_KINDS.iter().position(|&c| c == k).unwrap(),
            ProcessKind::Injection => 16,
            ProcessKind::Factorize => 17,
            ProcessKind::Solve => 18,
            ProcessKind::Control(k) => 32 + BLOCK_KINDS.iter().position(|&b| b == k).unwrap(),
        }
    }

    pub fn name(self) -> String {
        match self {
            ProcessKind::Norton(k) => format!("norton.{k}"),
            ProcessKind::Injection => "injection".into(),
            ProcessKind::Factorize => "factorize".into(),
            ProcessKind::Solve => "solve".into(),
            ProcessKind::Control(k) => format!("ctrl.{k}"),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "injection" => Some(ProcessKind::Injection),
            "factorize" => Some(ProcessKind::Factorize),
            "solve" => Some(ProcessKind::Solve),
            _ => {
                if let Some(k) = s.strip_prefix("norton.") {
                    ComponentKind::parse(k).map(ProcessKind::Norton)
                } else {
                    s.strip_prefix("ctrl.").and_then(BlockKind::parse).map(ProcessKind::Control)
                }
            }
        }
    }

    pub fn all() -> impl Iterator<Item = ProcessKind> {
        COMPONENT_KINDS
            .into_iter()
            .map(ProcessKind::Norton)
            .chain([ProcessKind::Injection, ProcessKind::Factorize, ProcessKind::Solve])
            .chain(BLOCK_KINDS.into_iter().map(ProcessKind::Control))
    }
}

impl fmt::Display for ProcessKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Named description of an execution backend.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceProfile {
    pub name: String,
    pub strategy: Strategy,
    /// Maximum lanes (processes × batch width) one group may occupy.
    pub capacity: usize,
    /// Whether oversized groups may be split into several groups.
    pub tiling: bool,
    pub workers: usize,
    pub factorization: &'static str,
}

pub const FACTORIZATION: &str = "lu-static-pivot-mindegree";

impl DeviceProfile {
    pub fn builtin(name: &str) -> Option<Self> {
        let p = |strategy, capacity, workers| DeviceProfile {
            name: name.to_string(),
            strategy,
            capacity,
            tiling: true,
            workers,
            factorization: FACTORIZATION,
        };
        match name {
            "cpu-serial" => Some(p(Strategy::Serial, 1 << 20, 1)),
            "cpu-parallel" => Some(p(Strategy::LayerParallel, 1 << 16, 8)),
            "cpu-vector" => Some(p(Strategy::Vectorized, 1 << 20, 1)),
            _ => None,
        }
    }

    pub fn names() -> [&'static str; 3] {
        ["cpu-serial", "cpu-parallel", "cpu-vector"]
    }

    pub fn lookup(name: &str) -> Result<Self, CompileError> {
        Self::builtin(name).ok_or_else(|| CompileError::UnknownProfile(name.to_string()))
    }
}

/// Full pipeline: model to schedule (with an optional scenario batch).
pub fn compile(
    model: &crate::model::NetworkModel,
    profile: &DeviceProfile,
    batch: Option<&ScenarioBatch>,
) -> Result<(ScheduleProgram, LoopReport), CompileError> {
    let (g, report) = break_algebraic_loops(&build_cgm(model));
    let mut l = group_layer_processes(&layer(&g)?, profile);
    if let Some(b) = batch {
        l = vectorize(&l, b)?;
    }
    Ok((emit_schedule(&l, profile)?, report))
}
