use std::collections::{BTreeMap, BTreeSet};

use crate::graph::{break_cycles, Digraph};
use crate::model::{BlockKind, NetworkModel, SignalSource};

use super::ProcessKind;

/// Where a process input comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Port {
    /// Solved voltage of a non-ground node (model node index).
    Node(usize),
    /// Branch current of a component (model component index).
    Branch(usize),
    /// Output of another process (vertex id).
    Output(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasicProcess {
    pub id: usize,
    pub kind: ProcessKind,
    pub name: String,
    /// Component or block index in the model; `None` for the singletons
    /// and inserted delays.
    pub subject: Option<usize>,
    pub inputs: Vec<Port>,
}

/// Computation graph: processes plus dependency edges `producer -> consumer`.
///
/// Besides data edges the graph carries ordering edges. Injections precede
/// the factorization, so the electrical phase occupies four consecutive
/// layers. Reads of previous-step values are ordered before the overwrite:
/// a controlled source's Norton update precedes its actuator block, and a
/// delay precedes the producer of the value it samples.
#[derive(Debug, Clone, PartialEq)]
pub struct CGM {
    pub model: NetworkModel,
    pub vertices: Vec<BasicProcess>,
    pub edges: Vec<(usize, usize)>,
}

impl CGM {
    pub fn digraph(&self) -> Digraph {
        Digraph::from_edges(self.vertices.len(), self.edges.iter().copied())
    }

    pub fn count(&self, kind: ProcessKind) -> usize {
        self.vertices.iter().filter(|v| v.kind == kind).count()
    }
}

pub fn build_cgm(model: &NetworkModel) -> CGM {
    let comp_order = model.component_order();
    let block_order = model.block_order();
    let nc = comp_order.len();
    let mut vertices = Vec::with_capacity(2 * nc + 2 + block_order.len());
    let mut norton_of = vec![0; nc];
    for &ci in &comp_order {
        norton_of[ci] = vertices.len();
        vertices.push(BasicProcess {
            id: vertices.len(),
            kind: ProcessKind::Norton(model.components[ci].kind),
            name: format!("norton:{}", model.components[ci].id),
            subject: Some(ci),
            inputs: Vec::new(),
        });
    }
    let mut injection_of = vec![0; nc];
    for &ci in &comp_order {
        injection_of[ci] = vertices.len();
        vertices.push(BasicProcess {
            id: vertices.len(),
            kind: ProcessKind::Injection,
            name: format!("injection:{}", model.components[ci].id),
            subject: Some(ci),
            inputs: vec![Port::Output(norton_of[ci])],
        });
    }
    let factorize = vertices.len();
    vertices.push(BasicProcess {
        id: factorize,
        kind: ProcessKind::Factorize,
        name: "factorize".into(),
        subject: None,
        inputs: Vec::new(),
    });
    let solve = vertices.len();
    vertices.push(BasicProcess {
        id: solve,
        kind: ProcessKind::Solve,
        name: "solve".into(),
        subject: None,
        inputs: vec![Port::Output(factorize)],
    });
    let block_index: BTreeMap<&str, usize> =
        model.control_blocks.iter().enumerate().map(|(i, b)| (b.id.as_str(), i)).collect();
    let comp_index: BTreeMap<&str, usize> =
        model.components.iter().enumerate().map(|(i, c)| (c.id.as_str(), i)).collect();
    let node_index = model.node_index();
    let block_base = vertices.len();
    let mut vertex_of_block = vec![0; block_order.len()];
    for (r, &bi) in block_order.iter().enumerate() {
        vertex_of_block[bi] = block_base + r;
    }
    for &bi in &block_order {
        let b = &model.control_blocks[bi];
        let inputs = b
            .inputs
            .iter()
            .map(|r| match model.resolve_signal(r) {
                Some(SignalSource::Block(id)) => Port::Output(vertex_of_block[block_index[id]]),
                Some(SignalSource::NodeVoltage(n)) => Port::Node(node_index[n]),
                Some(SignalSource::BranchCurrent(c)) => Port::Branch(comp_index[c]),
                None => unreachable!("validated reference `{r}`"),
            })
            .collect();
        vertices.push(BasicProcess {
            id: vertices.len(),
            kind: ProcessKind::Control(b.kind),
            name: b.id.clone(),
            subject: Some(bi),
            inputs,
        });
    }

    let mut edges = BTreeSet::new();
    for ci in 0..nc {
        let (n, j) = (norton_of[ci], injection_of[ci]);
        edges.insert((n, j));
        edges.insert((j, solve));
        edges.insert((j, factorize));
        edges.insert((n, solve));
        if model.components[ci].kind.is_conductive() {
            edges.insert((n, factorize));
        }
    }
    edges.insert((factorize, solve));
    for v in &vertices[block_base..] {
        let delay = v.kind == ProcessKind::Control(BlockKind::Delay);
        for p in &v.inputs {
            match (*p, delay) {
                (Port::Output(src), false) => {
                    edges.insert((src, v.id));
                }
                (Port::Output(src), true) => {
                    if src != v.id {
                        edges.insert((v.id, src));
                    }
                }
                (_, false) => {
                    edges.insert((solve, v.id));
                }
                (_, true) => {
                    edges.insert((v.id, solve));
                }
            }
        }
    }
    for (ci, c) in model.components.iter().enumerate() {
        if let Some(act) = model.actuator_for(&c.id) {
            edges.insert((norton_of[ci], vertex_of_block[block_index[act]]));
        }
    }
    CGM { model: model.clone(), vertices, edges: edges.into_iter().collect() }
}

/// One broken algebraic loop.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoopRecord {
    /// Blocks of the strongly connected component the edge was cut from.
    pub members: Vec<String>,
    pub producer: String,
    pub consumer: String,
    /// Vertex id of the inserted delay.
    pub delay: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoopReport {
    pub loops: Vec<LoopRecord>,
}

/// Cuts every direct-feedthrough cycle among control processes by routing
/// one edge per necessary cut through a new one-step delay process.
///
/// Cycles can only involve control blocks: no edge enters a Norton update
/// and delays have no incoming edges.
pub fn break_algebraic_loops(graph: &CGM) -> (CGM, LoopReport) {
    let control: Vec<usize> = graph
        .vertices
        .iter()
        .filter(|v| matches!(v.kind, ProcessKind::Control(_)))
        .map(|v| v.id)
        .collect();
    let mut local = vec![usize::MAX; graph.vertices.len()];
    for (i, &v) in control.iter().enumerate() {
        local[v] = i;
    }
    let sub = Digraph::from_edges(
        control.len(),
        graph
            .edges
            .iter()
            .filter(|(a, b)| local[*a] != usize::MAX && local[*b] != usize::MAX)
            .map(|&(a, b)| (local[a], local[b])),
    );
    let mut out = graph.clone();
    let mut report = LoopReport::default();
    let mut edges: BTreeSet<(usize, usize)> = out.edges.iter().copied().collect();
    for cut in break_cycles(&sub) {
        let (p, c) = (control[cut.producer], control[cut.consumer]);
        let d = out.vertices.len();
        out.vertices.push(BasicProcess {
            id: d,
            kind: ProcessKind::Control(BlockKind::Delay),
            name: format!("delay:{}->{}", out.vertices[p].name, out.vertices[c].name),
            subject: None,
            inputs: vec![Port::Output(p)],
        });
        for port in &mut out.vertices[c].inputs {
            if *port == Port::Output(p) {
                *port = Port::Output(d);
            }
        }
        edges.remove(&(p, c));
        edges.insert((d, c));
        edges.insert((d, p));
        report.loops.push(LoopRecord {
            members: cut.members.iter().map(|&m| graph.vertices[control[m]].name.clone()).collect(),
            producer: graph.vertices[p].name.clone(),
            consumer: graph.vertices[c].name.clone(),
            delay: d,
        });
    }
    out.edges = edges.into_iter().collect();
    (out, report)
}
