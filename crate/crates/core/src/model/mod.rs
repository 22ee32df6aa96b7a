//! Model/task documents: the network description a simulation task is
//! compiled from.
//!
//! Documents are strict JSON (unknown keys rejected). Parsing expands
//! `pv_subsystem` macro components into primitive components, control
//! blocks and couplings, so a parsed [`NetworkModel`] only holds primitives
//! and serializes back to an equivalent document.

mod document;
mod pv;
mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use document::{parse_model, serialize_model};
pub use pv::{PV_CONTROL_BLOCKS, expand_pv_subsystem};
pub use validate::{validate, Issue, IssueCode, Severity, ValidationReport};

/// Reserved identifier of the ground node.
pub const GROUND: &str = "0";

/// A parameter value: a scalar or a list of scalars (e.g. the sign vector of
/// a summing junction).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Param {
    Num(f64),
    List(Vec<f64>),
}

pub type Params = BTreeMap<String, Param>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ComponentKind {
    Resistor,
    Inductor,
    Capacitor,
    SeriesRl,
    VoltageSource,
    CurrentSource,
    Switch,
    ControlledCurrentSource,
    /// Irradiance/temperature dependent current source produced by PV
    /// expansion.
    PvArray,
    /// Macro component, only present in documents, never in a parsed model.
    PvSubsystem,
}

impl ComponentKind {
    pub const PRIMITIVES: [ComponentKind; 9] = [
        ComponentKind::Resistor,
        ComponentKind::Inductor,
        ComponentKind::Capacitor,
        ComponentKind::SeriesRl,
        ComponentKind::VoltageSource,
        ComponentKind::CurrentSource,
        ComponentKind::Switch,
        ComponentKind::ControlledCurrentSource,
        ComponentKind::PvArray,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ComponentKind::Resistor => "resistor",
            ComponentKind::Inductor => "inductor",
            ComponentKind::Capacitor => "capacitor",
            ComponentKind::SeriesRl => "series_rl",
            ComponentKind::VoltageSource => "voltage_source",
            ComponentKind::CurrentSource => "current_source",
            ComponentKind::Switch => "switch",
            ComponentKind::ControlledCurrentSource => "controlled_current_source",
            ComponentKind::PvArray => "pv_array",
            ComponentKind::PvSubsystem => "pv_subsystem",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::PRIMITIVES
            .iter()
            .copied()
            .chain(std::iter::once(ComponentKind::PvSubsystem))
            .find(|k| k.as_str() == s)
    }

    /// Whether the branch contributes a conductance to the nodal matrix.
    pub fn is_conductive(self) -> bool {
        !matches!(
            self,
            ComponentKind::CurrentSource
                | ComponentKind::ControlledCurrentSource
                | ComponentKind::PvArray
        )
    }
}

impl fmt::Display for ComponentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BlockKind {
    Gain,
    Sum,
    Integrator,
    FirstOrderLag,
    Limiter,
    PiController,
    Comparator,
    Constant,
    Delay,
}

impl BlockKind {
    pub const ALL: [BlockKind; 9] = [
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

    pub fn as_str(self) -> &'static str {
        match self {
            BlockKind::Gain => "gain",
            BlockKind::Sum => "sum",
            BlockKind::Integrator => "integrator",
            BlockKind::FirstOrderLag => "first_order_lag",
            BlockKind::Limiter => "limiter",
            BlockKind::PiController => "pi_controller",
            BlockKind::Comparator => "comparator",
            BlockKind::Constant => "constant",
            BlockKind::Delay => "delay",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|k| k.as_str() == s)
    }

    /// Output at step n depends on the input at step n.
    ///
    /// The trapezoidal integrator, lag and PI all carry a direct `u_n` term,
    /// so only the delay breaks a same-step dependency.
    pub fn direct_feedthrough(self) -> bool {
        !matches!(self, BlockKind::Delay)
    }

    /// Number of persistent state slots besides the output.
    pub fn state_slots(self) -> usize {
        match self {
            BlockKind::Integrator | BlockKind::FirstOrderLag => 1,
            BlockKind::PiController => 2,
            _ => 0,
        }
    }

    pub fn arity_ok(self, n: usize) -> bool {
        match self {
            BlockKind::Sum => n >= 2,
            BlockKind::Comparator => n == 2,
            BlockKind::Constant => n == 0,
            _ => n == 1,
        }
    }

    pub fn arity_text(self) -> &'static str {
        match self {
            BlockKind::Sum => "at least 2",
            BlockKind::Comparator => "exactly 2",
            BlockKind::Constant => "exactly 0",
            _ => "exactly 1",
        }
    }
}

impl fmt::Display for BlockKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentInstance {
    pub id: String,
    pub kind: ComponentKind,
    pub params: Params,
    pub terminals: Vec<String>,
}

impl ComponentInstance {
    pub fn num(&self, key: &str) -> Option<f64> {
        match self.params.get(key) {
            Some(Param::Num(v)) => Some(*v),
            _ => None,
        }
    }

    pub fn num_or(&self, key: &str, default: f64) -> f64 {
        self.num(key).unwrap_or(default)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlBlock {
    pub id: String,
    pub kind: BlockKind,
    pub params: Params,
    pub inputs: Vec<String>,
}

impl ControlBlock {
    pub fn direct_feedthrough(&self) -> bool {
        self.kind.direct_feedthrough()
    }

    pub fn num(&self, key: &str) -> Option<f64> {
        match self.params.get(key) {
            Some(Param::Num(v)) => Some(*v),
            _ => None,
        }
    }

    pub fn list(&self, key: &str) -> Option<&[f64]> {
        match self.params.get(key) {
            Some(Param::List(v)) => Some(v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingDirection {
    /// Electrical quantity read by the control system.
    Meter,
    /// Control signal driving a controlled source.
    Actuator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coupling {
    pub direction: CouplingDirection,
    pub electrical_ref: String,
    pub signal_ref: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Serial,
    LayerParallel,
    Vectorized,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Serial => "serial",
            Strategy::LayerParallel => "layer_parallel",
            Strategy::Vectorized => "vectorized",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "serial" => Some(Strategy::Serial),
            "layer_parallel" => Some(Strategy::LayerParallel),
            "vectorized" => Some(Strategy::Vectorized),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    pub dt: f64,
    pub duration: f64,
    #[serde(default)]
    pub channels: Vec<String>,
    #[serde(default = "default_profile")]
    pub device_profile: String,
    #[serde(default = "default_strategy")]
    pub strategy: Strategy,
}

fn default_profile() -> String {
    "cpu-serial".to_string()
}

fn default_strategy() -> Strategy {
    Strategy::Serial
}

impl TaskConfig {
    /// ⌈duration/dt⌉, tolerant of the round-off in ratios such as 5e-3/1e-6.
    pub fn step_count(&self) -> usize {
        let ratio = self.duration / self.dt;
        let nearest = ratio.round();
        if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
            nearest as usize
        } else {
            ratio.ceil() as usize
        }
    }
}

/// A parsed network: electrical components, control blocks, couplings and
/// the task configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    /// Non-ground node identifiers; the ground `0` is implicit.
    pub nodes: Vec<String>,
    /// Designated root node (used when replicating feeders).
    pub root: Option<String>,
    pub components: Vec<ComponentInstance>,
    pub control_blocks: Vec<ControlBlock>,
    pub couplings: Vec<Coupling>,
    pub task: TaskConfig,
}

/// What a signal or channel reference resolves to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalSource<'a> {
    NodeVoltage(&'a str),
    BranchCurrent(&'a str),
    Block(&'a str),
}

impl NetworkModel {
    pub fn component(&self, id: &str) -> Option<&ComponentInstance> {
        self.components.iter().find(|c| c.id == id)
    }

    pub fn block(&self, id: &str) -> Option<&ControlBlock> {
        self.control_blocks.iter().find(|b| b.id == id)
    }

    pub fn is_node(&self, id: &str) -> bool {
        id == GROUND || self.nodes.iter().any(|n| n == id)
    }

    /// Resolves a control input or channel reference: block output, meter
    /// signal, node voltage or branch current (in that order).
    pub fn resolve_signal(&self, reference: &str) -> Option<SignalSource<'_>> {
        if let Some(b) = self.block(reference) {
            return Some(SignalSource::Block(&b.id));
        }
        let meter = self.couplings.iter().find(|c| {
            c.direction == CouplingDirection::Meter && c.signal_ref == reference
        });
        let target = meter.map(|m| m.electrical_ref.as_str()).unwrap_or(reference);
        if let Some(n) = self.nodes.iter().find(|n| n.as_str() == target) {
            return Some(SignalSource::NodeVoltage(n));
        }
        if let Some(c) = self.component(target) {
            return Some(SignalSource::BranchCurrent(&c.id));
        }
        None
    }

    /// The block driving a controlled source, if any.
    pub fn actuator_for(&self, component: &str) -> Option<&str> {
        self.couplings
            .iter()
            .find(|c| c.direction == CouplingDirection::Actuator && c.electrical_ref == component)
            .map(|c| c.signal_ref.as_str())
    }

    /// Index of each non-ground node in the solved system.
    pub fn node_index(&self) -> BTreeMap<&str, usize> {
        self.nodes.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect()
    }

    /// Component indices in ascending identifier order.
    ///
    /// Every per-node accumulation walks components in this order, which
    /// makes results reproducible across backends.
    pub fn component_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.components.len()).collect();
        order.sort_by(|&a, &b| self.components[a].id.cmp(&self.components[b].id));
        order
    }

    /// Control block indices in ascending identifier order.
    pub fn block_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.control_blocks.len()).collect();
        order.sort_by(|&a, &b| self.control_blocks[a].id.cmp(&self.control_blocks[b].id));
        order
    }

    /// A string capturing everything except parameter values. Two models
    /// with the same signature compile to isomorphic graphs.
    pub fn topology_signature(&self) -> String {
        let mut s = String::new();
        s.push_str(&self.nodes.join(","));
        s.push('|');
        for c in &self.components {
            s.push_str(&format!("{}:{}:{};", c.id, c.kind, c.terminals.join(",")));
            let keys: BTreeSet<&String> = c.params.keys().collect();
            s.push_str(&format!("{keys:?};"));
        }
        s.push('|');
        for b in &self.control_blocks {
            s.push_str(&format!("{}:{}:{};", b.id, b.kind, b.inputs.join(",")));
        }
        s.push('|');
        for c in &self.couplings {
            s.push_str(&format!("{:?}:{}:{};", c.direction, c.electrical_ref, c.signal_ref));
        }
        s.push('|');
        s.push_str(&self.task.channels.join(","));
        s
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("malformed document at {location}: {message}")]
    MalformedDocument { location: String, message: String },
    #[error("unknown component kind `{kind}` for `{id}` at {location}")]
    UnknownComponentKind { id: String, kind: String, location: String },
    #[error("unknown control block kind `{kind}` for `{id}` at {location}")]
    UnknownBlockKind { id: String, kind: String, location: String },
    #[error("reference `{reference}` does not resolve at {location}")]
    DanglingReference { reference: String, location: String },
    #[error("duplicate identifier `{id}` at {location}")]
    DuplicateIdentifier { id: String, location: String },
    #[error("invalid parameter `{param}` of `{id}` at {location}: {message}")]
    InvalidParameter { id: String, param: String, message: String, location: String },
    #[error("`{id}` ({kind}) expects {expected} inputs/terminals, found {found} at {location}")]
    ArityMismatch { id: String, kind: String, expected: String, found: usize, location: String },
    #[error("invalid task configuration at {location}: {message}")]
    InvalidTask { message: String, location: String },
}

impl ModelError {
    pub fn location(&self) -> &str {
        match self {
            ModelError::MalformedDocument { location, .. }
            | ModelError::UnknownComponentKind { location, .. }
            | ModelError::UnknownBlockKind { location, .. }
            | ModelError::DanglingReference { location, .. }
            | ModelError::DuplicateIdentifier { location, .. }
            | ModelError::InvalidParameter { location, .. }
            | ModelError::ArityMismatch { location, .. }
            | ModelError::InvalidTask { location, .. } => location,
        }
    }
}
