//! Serial reference stepper.
//!
//! One step runs the electrical phase (Norton update, injections,
//! factorization when the matrix changed, solve, branch currents) and then
//! the control phase. Meters therefore see the voltages and currents just
//! solved, and controlled sources use their actuator's output from the
//! previous step.

use crate::graph::{break_cycles, BrokenEdge, Digraph};
use crate::model::{BlockKind, ComponentKind, NetworkModel, SignalSource, TaskConfig};
use crate::waveform::WaveformSet;

use super::companion::{branch_current, companion_constants, initial_branch, norton, BranchState};
use super::control::{block_constants, step_block};
use super::lu::Symbolic;
use super::sparse::{signed_sum, terminal_pairs, GatherPlan, StampPlan};
use super::{cells, diverged, KernelError};

/// Data-dependency graph among control blocks, vertices in ascending
/// block-id order. A block reading another adds `producer -> consumer`;
/// a delay instead precedes the producer it samples, since it must read
/// the previous-step value before the producer overwrites it.
pub fn control_graph(model: &NetworkModel) -> (Digraph, Vec<usize>) {
    let order = model.block_order();
    let mut rank = vec![0; order.len()];
    for (r, &b) in order.iter().enumerate() {
        rank[b] = r;
    }
    let index: std::collections::BTreeMap<&str, usize> =
        model.control_blocks.iter().enumerate().map(|(i, b)| (b.id.as_str(), i)).collect();
    let mut g = Digraph::new(order.len());
    for (r, &b) in order.iter().enumerate() {
        let blk = &model.control_blocks[b];
        for input in &blk.inputs {
            let Some(&p) = index.get(input.as_str()) else { continue };
            if blk.kind == BlockKind::Delay {
                if p != b {
                    g.add_edge(r, rank[p]);
                }
            } else {
                g.add_edge(rank[p], r);
            }
        }
    }
    (g, order)
}

/// Edges of [`control_graph`] replaced by one-step delays.
pub fn control_loop_breaks(model: &NetworkModel) -> Vec<BrokenEdge> {
    break_cycles(&control_graph(model).0)
}

#[derive(Debug, Clone, Copy)]
enum Src {
    Node(usize),
    Branch(usize),
    Block(usize),
    /// Previous-step output of a block (inserted delay).
    Delayed(usize),
    /// Previous-step value of a signal (delay block).
    Register(usize),
}

struct Comp {
    kind: ComponentKind,
    k: Vec<f64>,
    a: Option<usize>,
    b: Option<usize>,
    drive: Option<usize>,
}

struct Block {
    kind: BlockKind,
    k: Vec<f64>,
    inputs: Vec<Src>,
}

/// Incremental serial stepper; [`run_serial`] drives it to completion.
pub struct SerialStepper {
    dt: f64,
    step: usize,
    comps: Vec<Comp>,
    blocks: Vec<Block>,
    order: Vec<usize>,
    /// Delay blocks with the source they sample.
    delays: Vec<(usize, Src)>,
    stamp: StampPlan,
    gather: GatherPlan,
    symbolic: Symbolic,
    pub v: Vec<f64>,
    pub bv: Vec<f64>,
    pub bi: Vec<f64>,
    pub g: Vec<f64>,
    pub h: Vec<f64>,
    pub s: Vec<f64>,
    pub rhs: Vec<f64>,
    pub matrix: Vec<f64>,
    lu: Vec<f64>,
    pub y: Vec<f64>,
    prev_y: Vec<f64>,
    state: Vec<[f64; 2]>,
    reg: Vec<f64>,
    pub factorizations: usize,
    scratch_pos: Vec<usize>,
    scratch_y: Vec<f64>,
}

impl SerialStepper {
    pub fn new(model: &NetworkModel, config: &TaskConfig) -> Self {
        let pairs = terminal_pairs(model);
        let block_index: std::collections::BTreeMap<&str, usize> =
            model.control_blocks.iter().enumerate().map(|(i, b)| (b.id.as_str(), i)).collect();
        let comp_index: std::collections::BTreeMap<&str, usize> =
            model.components.iter().enumerate().map(|(i, c)| (c.id.as_str(), i)).collect();
        let node_index = model.node_index();
        let comps: Vec<Comp> = model
            .components
            .iter()
            .zip(&pairs)
            .map(|(c, &(a, b))| Comp {
                kind: c.kind,
                k: companion_constants(c),
                a,
                b,
                drive: model.actuator_for(&c.id).map(|blk| block_index[blk]),
            })
            .collect();
        let resolve = |r: &str| match model.resolve_signal(r) {
            Some(SignalSource::Block(b)) => Src::Block(block_index[b]),
            Some(SignalSource::NodeVoltage(n)) => Src::Node(node_index[n]),
            Some(SignalSource::BranchCurrent(c)) => Src::Branch(comp_index[c]),
            None => unreachable!("validated reference `{r}`"),
        };
        let (graph, canon) = control_graph(model);
        let breaks = break_cycles(&graph);
        let mut blocks: Vec<Block> = model
            .control_blocks
            .iter()
            .map(|b| Block { kind: b.kind, k: block_constants(b), inputs: b.inputs.iter().map(|i| resolve(i)).collect() })
            .collect();
        let mut delays = Vec::new();
        for (bi, b) in blocks.iter_mut().enumerate() {
            if b.kind == BlockKind::Delay {
                delays.push((bi, b.inputs[0]));
                b.inputs[0] = Src::Register(delays.len() - 1);
            }
        }
        for e in &breaks {
            let (p, c) = (canon[e.producer], canon[e.consumer]);
            for src in &mut blocks[c].inputs {
                if matches!(src, Src::Block(x) if *x == p) {
                    *src = Src::Delayed(p);
                }
            }
        }
        let mut pruned = Digraph::new(canon.len());
        for (a, b) in graph.edges() {
            if !breaks.iter().any(|e| (e.producer, e.consumer) == (a, b)) {
                pruned.add_edge(a, b);
            }
        }
        let order = pruned
            .topological_order()
            .expect("loop breaking leaves the control graph acyclic")
            .into_iter()
            .map(|r| canon[r])
            .filter(|&b| blocks[b].kind != BlockKind::Delay)
            .collect();

        let stamp = StampPlan::new(model);
        let symbolic = Symbolic::analyze(&stamp.matrix(|_| 1.0));
        let nc = comps.len();
        let nb = blocks.len();
        let mut bv = vec![0.0; nc];
        let mut bi = vec![0.0; nc];
        for (i, c) in model.components.iter().enumerate() {
            (bv[i], bi[i]) = initial_branch(c);
        }
        let n = model.nodes.len();
        SerialStepper {
            dt: config.dt,
            step: 0,
            comps,
            order,
            delays,
            gather: GatherPlan::new(model),
            lu: vec![0.0; symbolic.nnz()],
            matrix: vec![f64::NAN; stamp.nnz()],
            scratch_pos: vec![0; n],
            scratch_y: vec![0.0; n],
            symbolic,
            stamp,
            v: vec![0.0; n],
            bv,
            bi,
            g: vec![0.0; nc],
            h: vec![0.0; nc],
            s: vec![0.0; nc],
            rhs: vec![0.0; n],
            y: vec![0.0; nb],
            prev_y: vec![0.0; nb],
            state: vec![[0.0; 2]; nb],
            reg: vec![0.0; model.control_blocks.iter().filter(|b| b.kind == BlockKind::Delay).count()],
            factorizations: 0,
            blocks,
        }
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }

    fn read(&self, src: Src) -> f64 {
        match src {
            Src::Node(n) => self.v[n],
            Src::Branch(c) => self.bi[c],
            Src::Block(b) => self.y[b],
            Src::Delayed(b) => self.prev_y[b],
            Src::Register(r) => self.reg[r],
        }
    }

    pub fn step(&mut self) -> Result<(), KernelError> {
        self.step += 1;
        let n_step = self.step;
        let t = n_step as f64 * self.dt;
        let dt = self.dt;
        for (ci, c) in self.comps.iter().enumerate() {
            let st = BranchState {
                v_prev: self.bv[ci],
                i_prev: self.bi[ci],
                drive: c.drive.map_or(0.0, |b| self.y[b]),
            };
            (self.g[ci], self.h[ci], self.s[ci]) = norton(c.kind, &c.k, st, t, dt);
        }
        let j: Vec<f64> = (0..self.comps.len()).map(|c| self.s[c] - self.h[c]).collect();

        let mut changed = self.factorizations == 0;
        for (e, terms) in self.stamp.terms.iter().enumerate() {
            let val = signed_sum(terms, |c| self.g[c]);
            if val.to_bits() != self.matrix[e].to_bits() {
                changed = true;
            }
            self.matrix[e] = val;
        }
        if changed {
            let na = self.matrix.len();
            let mut buf = Vec::with_capacity(na + self.lu.len());
            buf.extend_from_slice(&self.matrix);
            buf.extend_from_slice(&self.lu);
            self.symbolic.factor_slots(cells(&mut buf), |e| e, |p| na + p, &mut self.scratch_pos)?;
            self.lu.copy_from_slice(&buf[na..]);
            self.factorizations += 1;
        }
        for (r, terms) in self.gather.nodes.iter().enumerate() {
            self.rhs[r] = signed_sum(terms, |c| j[c]);
        }
        let rhs = &self.rhs;
        let v = &mut self.v;
        self.symbolic.solve_slots(cells(&mut self.lu), |p| p, |r| rhs[r], &mut self.scratch_y, |r, x| v[r] = x);
        for (ni, &x) in self.v.iter().enumerate() {
            if diverged(x) {
                return Err(KernelError::NonFiniteState { subject: format!("node {ni}"), step: n_step });
            }
        }
        for (ci, c) in self.comps.iter().enumerate() {
            let va = c.a.map_or(0.0, |a| self.v[a]);
            let vb = c.b.map_or(0.0, |b| self.v[b]);
            let bv = va - vb;
            self.bv[ci] = bv;
            self.bi[ci] = branch_current(self.g[ci], self.h[ci], self.s[ci], bv);
            if diverged(self.bi[ci]) {
                return Err(KernelError::NonFiniteState { subject: format!("component {ci}"), step: n_step });
            }
        }

        self.prev_y.copy_from_slice(&self.y);
        for &(d, _) in &self.delays {
            let r = self.blocks[d].inputs[0];
            self.y[d] = self.read(r);
        }
        for oi in 0..self.order.len() {
            let b = self.order[oi];
            let blk = &self.blocks[b];
            let mut st = self.state[b];
            let y = step_block(
                blk.kind,
                &blk.k,
                blk.inputs.len(),
                |i| self.read(blk.inputs[i]),
                self.y[b],
                &mut st,
                dt,
            );
            if diverged(y) {
                return Err(KernelError::NonFiniteState { subject: format!("block {b}"), step: n_step });
            }
            self.state[b] = st;
            self.y[b] = y;
        }
        for ri in 0..self.delays.len() {
            self.reg[ri] = self.read(self.delays[ri].1);
        }
        Ok(())
    }

    /// Solved voltage of non-ground node `n`.
    pub fn node_voltage(&self, n: usize) -> f64 {
        self.v[n]
    }

    /// Current matrix as CSR values in the pattern of [`StampPlan`].
    pub fn matrix_plan(&self) -> &StampPlan {
        &self.stamp
    }
}

/// Outcome of a serial run.
#[derive(Debug, Clone, PartialEq)]
pub struct SerialRun {
    pub waveforms: WaveformSet,
    pub factorizations: usize,
}

/// Resolves channel names; an empty list records every node voltage.
pub fn channel_list(model: &NetworkModel, config: &TaskConfig) -> Vec<String> {
    if config.channels.is_empty() {
        model.nodes.clone()
    } else {
        config.channels.clone()
    }
}

pub fn run_serial(model: &NetworkModel, config: &TaskConfig) -> Result<SerialRun, KernelError> {
    let names = channel_list(model, config);
    let node_index = model.node_index();
    let block_index: std::collections::BTreeMap<&str, usize> =
        model.control_blocks.iter().enumerate().map(|(i, b)| (b.id.as_str(), i)).collect();
    let comp_index: std::collections::BTreeMap<&str, usize> =
        model.components.iter().enumerate().map(|(i, c)| (c.id.as_str(), i)).collect();
    let srcs: Vec<Src> = names
        .iter()
        .map(|r| match model.resolve_signal(r) {
            Some(SignalSource::Block(b)) => Src::Block(block_index[b]),
            Some(SignalSource::NodeVoltage(n)) => Src::Node(node_index[n]),
            Some(SignalSource::BranchCurrent(c)) => Src::Branch(comp_index[c]),
            None => unreachable!("validated channel `{r}`"),
        })
        .collect();
    let mut stepper = SerialStepper::new(model, config);
    let mut waves = WaveformSet::new(names, 1);
    for _ in 0..config.step_count() {
        stepper.step()?;
        let t = stepper.time();
        let row: Vec<f64> = srcs.iter().map(|&s| stepper.read(s)).collect();
        waves.push_row(t, row);
    }
    Ok(SerialRun { waveforms: waves, factorizations: stepper.factorizations })
}
