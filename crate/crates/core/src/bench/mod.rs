//! Benchmark families, step timing and report rendering.
//!
//! The scale family replicates the bundled 33-bus feeder at its root node;
//! the scenario family sweeps PV irradiance and temperature over one case.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::compiler::{CompileError, ScenarioBatch};
use crate::exec::ExecError;
use crate::model::{parse_model, ComponentKind, NetworkModel, GROUND};

mod report;
mod timing;

pub use report::{cost_table, report, CSV_HEADER, steps_per_task, CostRow, ReportFormat};
pub use timing::{
    measure, run_scale_benchmark, run_scenario_benchmark, Backend, Measurement, TimingConfig, TimingReport,
};

/// IEEE 33-bus radial feeder (Baran and Wu, 12.66 kV) with PV subsystems
/// at buses 18, 22 and 33. Lines and loads are series R-L branches; loads
/// are constant impedances at nominal voltage.
pub const IEEE33_PV3: &str = include_str!("../../data/ieee33_pv3.json");

pub fn ieee33_pv3() -> NetworkModel {
    parse_model(IEEE33_PV3).expect("bundled case parses")
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("replication count must be at least 1")]
    InvalidReplication,
    #[error("base case has no designated root node")]
    NoRoot,
    #[error("scenario grid needs at least one irradiance and one temperature")]
    EmptyGrid,
    #[error("base case has no PV arrays to sweep")]
    NoPv,
    #[error("unknown backend `{0}`")]
    UnknownBackend(String),
    #[error("vectorized lane {lane} differs from its serial run")]
    Mismatch { lane: usize },
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Exec(#[from] ExecError),
}

/// `k` copies of `base` sharing its root node. Copy 0 keeps the original
/// identifiers; copy `i` suffixes every other identifier with `@i`.
pub fn gen_scale_case(base: &NetworkModel, k: usize) -> Result<NetworkModel, BenchError> {
    if k == 0 {
        return Err(BenchError::InvalidReplication);
    }
    let root = base.root.clone().ok_or(BenchError::NoRoot)?;
    let mut m = base.clone();
    for i in 1..k {
        let rn = |s: &str| if s == root || s == GROUND { s.to_string() } else { format!("{s}@{i}") };
        m.nodes.extend(base.nodes.iter().filter(|n| **n != root).map(|n| rn(n)));
        m.components.extend(base.components.iter().map(|c| {
            let mut c = c.clone();
            c.id = rn(&c.id);
            c.terminals = c.terminals.iter().map(|t| rn(t)).collect();
            c
        }));
        m.control_blocks.extend(base.control_blocks.iter().map(|b| {
            let mut b = b.clone();
            b.id = rn(&b.id);
            b.inputs = b.inputs.iter().map(|x| rn(x)).collect();
            b
        }));
        m.couplings.extend(base.couplings.iter().map(|c| {
            let mut c = c.clone();
            c.electrical_ref = rn(&c.electrical_ref);
            c.signal_ref = rn(&c.signal_ref);
            c
        }));
    }
    Ok(m)
}

/// Irradiance-major Cartesian product; each row sets both values on every
/// PV array of `base`.
pub fn gen_scenarios(base: &NetworkModel, irradiance: &[f64], temperature: &[f64]) -> Result<ScenarioBatch, BenchError> {
    if irradiance.is_empty() || temperature.is_empty() {
        return Err(BenchError::EmptyGrid);
    }
    let arrays: Vec<&str> =
        base.components.iter().filter(|c| c.kind == ComponentKind::PvArray).map(|c| c.id.as_str()).collect();
    if arrays.is_empty() {
        return Err(BenchError::NoPv);
    }
    let mut rows = Vec::with_capacity(irradiance.len() * temperature.len());
    for &g in irradiance {
        for &t in temperature {
            let mut row = BTreeMap::new();
            for a in &arrays {
                row.insert(format!("{a}:irradiance"), g);
                row.insert(format!("{a}:temperature"), t);
            }
            rows.push(row);
        }
    }
    Ok(ScenarioBatch { rows })
}

/// Evenly spaced values in `[lo, hi]`; one value gives `lo`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Count of PV subsystems (one array each).
pub fn pv_count(m: &NetworkModel) -> usize {
    m.components.iter().filter(|c| c.kind == ComponentKind::PvArray).count()
}
