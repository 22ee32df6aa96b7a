use std::collections::BTreeMap;

use crate::model::{NetworkModel, Param};

use super::{CompileError, DeviceProfile, ProcessKind, CGM};

/// Same-kind processes of one layer, in lane order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Group {
    pub kind: ProcessKind,
    pub procs: Vec<usize>,
}

/// Layered CGM. `scenarios` holds one model per lane of the batch (the
/// base model alone when unvectorized).
#[derive(Debug, Clone, PartialEq)]
pub struct LDAG {
    pub cgm: CGM,
    pub layer_of: Vec<usize>,
    pub layers: Vec<Vec<Group>>,
    pub scenarios: Vec<NetworkModel>,
}

impl LDAG {
    pub fn width(&self) -> usize {
        self.scenarios.len()
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    /// Every edge goes to a strictly later layer.
    pub fn is_layer_forward(&self) -> bool {
        self.cgm.edges.iter().all(|&(a, b)| self.layer_of[a] < self.layer_of[b])
    }

    /// One singleton group per process, in vertex order.
    pub fn ungrouped(&self) -> LDAG {
        let mut out = self.clone();
        for layer in &mut out.layers {
            let mut procs: Vec<usize> = layer.iter().flat_map(|g| g.procs.iter().copied()).collect();
            procs.sort_unstable();
            *layer = procs
                .into_iter()
                .map(|p| Group { kind: self.cgm.vertices[p].kind, procs: vec![p] })
                .collect();
        }
        out
    }
}

/// Longest-path layering (sources at layer 0).
pub fn layer(graph: &CGM) -> Result<LDAG, CompileError> {
    let g = graph.digraph();
    let layer_of = match g.longest_path_layers() {
        Some(l) => l,
        None => {
            let members = g.cyclic_components().into_iter().next().unwrap_or_default();
            return Err(CompileError::CycleDetected(members));
        }
    };
    let count = layer_of.iter().map(|&l| l + 1).max().unwrap_or(0);
    let mut layers: Vec<Vec<Group>> = vec![Vec::new(); count];
    for v in &graph.vertices {
        layers[layer_of[v.id]].push(Group { kind: v.kind, procs: vec![v.id] });
    }
    let out = LDAG { cgm: graph.clone(), layer_of, layers, scenarios: vec![graph.model.clone()] };
    assert!(out.is_layer_forward(), "layering produced a backward edge");
    Ok(out)
}

/// Partitions each layer into same-kind groups ordered by kind id, lanes by
/// process id. Capacity limits are applied when the schedule is emitted.
pub fn group_layer_processes(ldag: &LDAG, _profile: &DeviceProfile) -> LDAG {
    let mut out = ldag.clone();
    for layer in &mut out.layers {
        let mut by_kind: BTreeMap<(usize, ProcessKind), Vec<usize>> = BTreeMap::new();
        for g in layer.iter() {
            for &p in &g.procs {
                by_kind.entry((g.kind.id(), g.kind)).or_default().push(p);
            }
        }
        *layer = by_kind
            .into_iter()
            .map(|((_, kind), mut procs)| {
                procs.sort_unstable();
                Group { kind, procs }
            })
            .collect();
    }
    out
}

/// Parameter overrides per scenario, keyed `<component or block id>:<param>`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScenarioBatch {
    pub rows: Vec<BTreeMap<String, f64>>,
}

impl ScenarioBatch {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `base` with row `s` applied.
    pub fn scenario(&self, base: &NetworkModel, s: usize) -> Result<NetworkModel, CompileError> {
        let mut m = base.clone();
        for (key, &value) in &self.rows[s] {
            let mismatch = |detail: String| CompileError::TopologyMismatch { scenario: s, detail };
            let (id, param) = key
                .rsplit_once(':')
                .ok_or_else(|| mismatch(format!("override key `{key}` is not `<id>:<param>`")))?;
            let params = if let Some(c) = m.components.iter_mut().find(|c| c.id == id) {
                &mut c.params
            } else if let Some(b) = m.control_blocks.iter_mut().find(|b| b.id == id) {
                &mut b.params
            } else {
                return Err(mismatch(format!("override `{key}` names no component or block")));
            };
            params.insert(param.to_string(), Param::Num(value));
        }
        if m.topology_signature() != base.topology_signature() {
            return Err(CompileError::TopologyMismatch {
                scenario: s,
                detail: "overrides change the parameter set or structure".into(),
            });
        }
        Ok(m)
    }
}

/// Widens the graph to one lane per scenario. The topology stays that of
/// the base; only constant tables and initial values differ per lane.
pub fn vectorize(ldag: &LDAG, batch: &ScenarioBatch) -> Result<LDAG, CompileError> {
    if batch.is_empty() {
        return Err(CompileError::EmptyBatch);
    }
    let base = &ldag.cgm.model;
    let scenarios = (0..batch.len()).map(|s| batch.scenario(base, s)).collect::<Result<_, _>>()?;
    Ok(LDAG { scenarios, ..ldag.clone() })
}

/// Vectorizes over explicit scenario models; every model must share the
/// base topology.
pub fn vectorize_models(ldag: &LDAG, models: Vec<NetworkModel>) -> Result<LDAG, CompileError> {
    if models.is_empty() {
        return Err(CompileError::EmptyBatch);
    }
    let sig = ldag.cgm.model.topology_signature();
    for (s, m) in models.iter().enumerate() {
        if m.topology_signature() != sig {
            return Err(CompileError::TopologyMismatch {
                scenario: s,
                detail: "structure differs from the base model".into(),
            });
        }
    }
    Ok(LDAG { scenarios: models, ..ldag.clone() })
}
