//! Schedule program: arena layout, per-process offset tables and the
//! line-oriented schedule file.
//!
//! # File grammar
//!
//! ```text
//! CGMSCHED v1 <profile> layers=<L> width=<N>
//! META dt=<f64> steps=<n> extent=<slots> nodes=<n> a_base=<s> lu_base=<s> counter=<s>
//! LUPERM <pivot-order...>
//! LUROW <i> diag=<offset> cols=<c,...>           one per matrix row
//! LUAMAP <factor-position...>                    one per matrix entry
//! STAMP <e> terms=<±slot,...>                    conductance sources per matrix entry
//! RHS <r> terms=<±slot,...>                      injection sources per node
//! COMP <c> a=<slot|-> b=<slot|-> g=<s> h=<s> s=<s> v=<s> i=<s>
//! CHANNEL slot=<s> name=<rest of line>
//! INIT <slot> <lane values...>
//! LAYER <i>
//! GROUP kind=<kind> count=<n> lane_base=<b>
//! P <id> lane=<l> slots=<s,...> const=<f64,...> name=<rest of line>
//! END
//! ```
//!
//! Slot `s` of lane `k` lives at arena index `s * width + k`. Floats are
//! written in shortest round-trip form, so parsing a file and writing it
//! again reproduces it byte for byte.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::kernels::{
    block_constants, channel_list, companion_constants, initial_branch, terminal_pairs, GatherPlan,
    StampPlan, Symbolic, Terms,
};
use crate::model::{BlockKind, SignalSource};

use super::{CompileError, DeviceProfile, Port, ProcessKind, LDAG};

/// Slots the solve process updates for one component after the solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CompRecord {
    pub a: Option<usize>,
    pub b: Option<usize>,
    pub g: usize,
    pub h: usize,
    pub s: usize,
    pub v: usize,
    pub i: usize,
}

/// One process with its slot bindings and per-lane constants.
///
/// Slot tables by kind:
/// * `norton.*`: `g h s v i [drive]`
/// * `injection`: `h s j`
/// * `factorize`, `solve`: empty (they use the program-level tables)
/// * `ctrl.delay`: `y in`
/// * other `ctrl.*`: `y state... inputs...`
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessRecord {
    pub id: usize,
    pub name: String,
    pub slots: Vec<usize>,
    pub consts: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleGroup {
    pub kind: ProcessKind,
    pub lane_base: usize,
    pub procs: Vec<ProcessRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleProgram {
    pub profile: String,
    pub width: usize,
    pub dt: f64,
    pub steps: usize,
    pub extent: usize,
    /// Node voltages occupy slots `0..nodes`.
    pub nodes: usize,
    pub a_base: usize,
    pub lu_base: usize,
    /// Per-lane factorization count.
    pub counter: usize,
    pub symbolic: Symbolic,
    pub stamp: Vec<Terms>,
    pub rhs: Vec<Terms>,
    pub comps: Vec<CompRecord>,
    pub channels: Vec<(String, usize)>,
    pub init: Vec<(usize, Vec<f64>)>,
    pub layers: Vec<Vec<ScheduleGroup>>,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("schedule line {line}: {message}")]
pub struct ScheduleParseError {
    pub line: usize,
    pub message: String,
}

const COMP_SLOTS: usize = 6;

pub fn emit_schedule(ldag: &LDAG, profile: &DeviceProfile) -> Result<ScheduleProgram, CompileError> {
    let cgm = &ldag.cgm;
    let base = &cgm.model;
    let width = ldag.width();
    let n = base.nodes.len();
    let nc = base.components.len();
    let comp_slot = |ci: usize, f: usize| n + COMP_SLOTS * ci + f;
    let (g, h, s, j, v, i) = (0, 1, 2, 3, 4, 5);

    let mut next = n + COMP_SLOTS * nc;
    let mut block_slot = vec![0; base.control_blocks.len()];
    for (bi, b) in base.control_blocks.iter().enumerate() {
        block_slot[bi] = next;
        next += 1 + b.kind.state_slots();
    }
    let mut out_slot = vec![usize::MAX; cgm.vertices.len()];
    for p in &cgm.vertices {
        if let ProcessKind::Control(_) = p.kind {
            out_slot[p.id] = match p.subject {
                Some(bi) => block_slot[bi],
                None => {
                    next += 1;
                    next - 1
                }
            };
        }
    }
    let stamp_plan = StampPlan::new(base);
    let symbolic = Symbolic::analyze(&stamp_plan.matrix(|_| 1.0));
    let a_base = next;
    let lu_base = a_base + stamp_plan.nnz();
    let counter = lu_base + symbolic.nnz();
    let extent = counter + 1;

    let port_slot = |p: &Port| match *p {
        Port::Node(x) => x,
        Port::Branch(c) => comp_slot(c, i),
        Port::Output(vx) => out_slot[vx],
    };
    let block_index: BTreeMap<&str, usize> =
        base.control_blocks.iter().enumerate().map(|(bi, b)| (b.id.as_str(), bi)).collect();
    let comp_index: BTreeMap<&str, usize> =
        base.components.iter().enumerate().map(|(ci, c)| (c.id.as_str(), ci)).collect();

    let record = |pid: usize| -> ProcessRecord {
        let p = &cgm.vertices[pid];
        let (slots, consts) = match p.kind {
            ProcessKind::Norton(_) => {
                let ci = p.subject.expect("norton subject");
                let mut slots: Vec<usize> = [g, h, s, v, i].iter().map(|&f| comp_slot(ci, f)).collect();
                if let Some(act) = base.actuator_for(&base.components[ci].id) {
                    slots.push(block_slot[block_index[act]]);
                }
                let consts = ldag
                    .scenarios
                    .iter()
                    .flat_map(|m| companion_constants(&m.components[ci]))
                    .collect();
                (slots, consts)
            }
            ProcessKind::Injection => {
                let ci = p.subject.expect("injection subject");
                (vec![comp_slot(ci, h), comp_slot(ci, s), comp_slot(ci, j)], Vec::new())
            }
            ProcessKind::Factorize | ProcessKind::Solve => (Vec::new(), Vec::new()),
            ProcessKind::Control(kind) => {
                let y = out_slot[pid];
                let mut slots = vec![y];
                if kind != BlockKind::Delay {
                    slots.extend((1..=kind.state_slots()).map(|k| y + k));
                }
                slots.extend(p.inputs.iter().map(port_slot));
                let consts = match p.subject {
                    Some(bi) => ldag
                        .scenarios
                        .iter()
                        .flat_map(|m| block_constants(&m.control_blocks[bi]))
                        .collect(),
                    None => Vec::new(),
                };
                (slots, consts)
            }
        };
        ProcessRecord { id: pid, name: p.name.clone(), slots, consts }
    };

    let mut layers = Vec::with_capacity(ldag.layers.len());
    for layer in &ldag.layers {
        let mut groups = Vec::new();
        let mut lane_base = 0;
        for grp in layer {
            let lanes = grp.procs.len() * width;
            let chunk = if lanes <= profile.capacity {
                grp.procs.len()
            } else if profile.tiling && width <= profile.capacity {
                profile.capacity / width
            } else {
                return Err(CompileError::CapacityExceeded {
                    kind: grp.kind.name(),
                    count: grp.procs.len(),
                    width,
                    capacity: profile.capacity,
                    profile: profile.name.clone(),
                });
            };
            for tile in grp.procs.chunks(chunk.max(1)) {
                groups.push(ScheduleGroup {
                    kind: grp.kind,
                    lane_base,
                    procs: tile.iter().map(|&p| record(p)).collect(),
                });
                lane_base += tile.len();
            }
        }
        layers.push(groups);
    }

    let pairs = terminal_pairs(base);
    let comps = (0..nc)
        .map(|ci| CompRecord {
            a: pairs[ci].0,
            b: pairs[ci].1,
            g: comp_slot(ci, g),
            h: comp_slot(ci, h),
            s: comp_slot(ci, s),
            v: comp_slot(ci, v),
            i: comp_slot(ci, i),
        })
        .collect();
    let node_index = base.node_index();
    let channels = channel_list(base, &base.task)
        .into_iter()
        .map(|name| {
            let slot = match base.resolve_signal(&name) {
                Some(SignalSource::NodeVoltage(x)) => node_index[x],
                Some(SignalSource::BranchCurrent(c)) => comp_slot(comp_index[c], i),
                Some(SignalSource::Block(b)) => block_slot[block_index[b]],
                None => unreachable!("validated channel `{name}`"),
            };
            (name, slot)
        })
        .collect();
    let mut init = Vec::new();
    for ci in 0..nc {
        let lanes: Vec<(f64, f64)> =
            ldag.scenarios.iter().map(|m| initial_branch(&m.components[ci])).collect();
        if lanes.iter().any(|&(a, _)| a != 0.0) {
            init.push((comp_slot(ci, v), lanes.iter().map(|l| l.0).collect()));
        }
        if lanes.iter().any(|&(_, b)| b != 0.0) {
            init.push((comp_slot(ci, i), lanes.iter().map(|l| l.1).collect()));
        }
    }

    let program = ScheduleProgram {
        profile: profile.name.clone(),
        width,
        dt: base.task.dt,
        steps: base.task.step_count(),
        extent,
        nodes: n,
        a_base,
        lu_base,
        counter,
        symbolic,
        stamp: stamp_plan.remap(|ci| comp_slot(ci, g)).terms,
        rhs: GatherPlan::new(base).remap(|ci| comp_slot(ci, j)).nodes,
        comps,
        channels,
        init,
        layers,
    };
    program.verify_disjoint()?;
    Ok(program)
}

impl ScheduleProgram {
    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn processes(&self) -> impl Iterator<Item = (ProcessKind, &ProcessRecord)> {
        self.layers
            .iter()
            .flatten()
            .flat_map(|g| g.procs.iter().map(move |p| (g.kind, p)))
    }

    pub fn process_count(&self) -> usize {
        self.processes().count()
    }

    /// Arena length in scalars.
    pub fn arena_len(&self) -> usize {
        self.extent * self.width
    }

    pub fn initial_arena(&self) -> Vec<f64> {
        let mut a = vec![0.0; self.arena_len()];
        for (slot, lanes) in &self.init {
            for (k, &x) in lanes.iter().enumerate() {
                a[slot * self.width + k] = x;
            }
        }
        a
    }

    /// Slots written by a process.
    pub fn writes(&self, kind: ProcessKind, p: &ProcessRecord) -> Vec<usize> {
        match kind {
            ProcessKind::Norton(_) => p.slots[..3].to_vec(),
            ProcessKind::Injection => vec![p.slots[2]],
            ProcessKind::Factorize => {
                let mut w: Vec<usize> = (self.a_base..self.counter + 1).collect();
                w.dedup();
                w
            }
            ProcessKind::Solve => (0..self.nodes)
                .chain(self.comps.iter().flat_map(|c| [c.v, c.i]))
                .collect(),
            ProcessKind::Control(BlockKind::Delay) => vec![p.slots[0]],
            ProcessKind::Control(k) => p.slots[..1 + k.state_slots()].to_vec(),
        }
    }

    /// Slots read by a process (excluding its own outputs).
    pub fn reads(&self, kind: ProcessKind, p: &ProcessRecord) -> Vec<usize> {
        match kind {
            ProcessKind::Norton(_) => p.slots[3..].to_vec(),
            ProcessKind::Injection => p.slots[..2].to_vec(),
            ProcessKind::Factorize => self.stamp.iter().flatten().map(|t| t.0).collect(),
            ProcessKind::Solve => self
                .rhs
                .iter()
                .flatten()
                .map(|t| t.0)
                .chain(self.comps.iter().flat_map(|c| [c.g, c.h, c.s]))
                .chain(self.lu_base..self.counter)
                .collect(),
            ProcessKind::Control(BlockKind::Delay) => vec![p.slots[1]],
            ProcessKind::Control(k) => p.slots[1 + k.state_slots()..].to_vec(),
        }
    }

    /// Within every layer, each slot is written by at most one process and
    /// never read by another process of the same layer.
    pub fn verify_disjoint(&self) -> Result<(), CompileError> {
        for (li, layer) in self.layers.iter().enumerate() {
            let mut writer: BTreeMap<usize, &str> = BTreeMap::new();
            let procs: Vec<(ProcessKind, &ProcessRecord)> =
                layer.iter().flat_map(|g| g.procs.iter().map(move |p| (g.kind, p))).collect();
            for &(kind, p) in &procs {
                for w in self.writes(kind, p) {
                    if let Some(first) = writer.insert(w, &p.name) {
                        return Err(CompileError::WriteConflict {
                            layer: li,
                            slot: w,
                            first: first.to_string(),
                            second: p.name.clone(),
                        });
                    }
                }
            }
            for &(kind, p) in &procs {
                for r in self.reads(kind, p) {
                    if let Some(&w) = writer.get(&r) {
                        if w != p.name {
                            return Err(CompileError::WriteConflict {
                                layer: li,
                                slot: r,
                                first: w.to_string(),
                                second: p.name.clone(),
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut o = String::new();
        let sym = &self.symbolic;
        let _ = writeln!(o, "CGMSCHED v1 {} layers={} width={}", self.profile, self.layers.len(), self.width);
        let _ = writeln!(
            o,
            "META dt={:?} steps={} extent={} nodes={} a_base={} lu_base={} counter={}",
            self.dt, self.steps, self.extent, self.nodes, self.a_base, self.lu_base, self.counter
        );
        let _ = writeln!(o, "LUPERM{}", join_prefixed(&sym.perm));
        for r in 0..sym.n {
            let cols = &sym.cols[sym.row_ptr[r]..sym.row_ptr[r + 1]];
            let _ = writeln!(o, "LUROW {r} diag={} cols={}", sym.diag[r] - sym.row_ptr[r], join(cols));
        }
        let _ = writeln!(o, "LUAMAP{}", join_prefixed(&sym.a_map));
        for (e, t) in self.stamp.iter().enumerate() {
            let _ = writeln!(o, "STAMP {e} terms={}", terms_text(t));
        }
        for (r, t) in self.rhs.iter().enumerate() {
            let _ = writeln!(o, "RHS {r} terms={}", terms_text(t));
        }
        let opt = |x: Option<usize>| x.map_or("-".to_string(), |v| v.to_string());
        for (ci, c) in self.comps.iter().enumerate() {
            let _ = writeln!(
                o,
                "COMP {ci} a={} b={} g={} h={} s={} v={} i={}",
                opt(c.a),
                opt(c.b),
                c.g,
                c.h,
                c.s,
                c.v,
                c.i
            );
        }
        for (name, slot) in &self.channels {
            let _ = writeln!(o, "CHANNEL slot={slot} name={name}");
        }
        for (slot, lanes) in &self.init {
            let _ = write!(o, "INIT {slot}");
            for x in lanes {
                let _ = write!(o, " {x:?}");
            }
            o.push('\n');
        }
        for (li, layer) in self.layers.iter().enumerate() {
            let _ = writeln!(o, "LAYER {li}");
            for g in layer {
                let _ = writeln!(o, "GROUP kind={} count={} lane_base={}", g.kind, g.procs.len(), g.lane_base);
                for (lane, p) in g.procs.iter().enumerate() {
                    let consts: Vec<String> = p.consts.iter().map(|x| format!("{x:?}")).collect();
                    let _ = writeln!(
                        o,
                        "P {} lane={lane} slots={} const={} name={}",
                        p.id,
                        join(&p.slots),
                        consts.join(","),
                        p.name
                    );
                }
            }
        }
        o.push_str("END\n");
        o
    }

    pub fn parse(text: &str) -> Result<Self, ScheduleParseError> {
        Parser::default().run(text)
    }
}

fn join(xs: &[usize]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn join_prefixed(xs: &[usize]) -> String {
    xs.iter().map(|x| format!(" {x}")).collect()
}

fn terms_text(t: &[(usize, bool)]) -> String {
    t.iter()
        .map(|&(s, neg)| format!("{}{s}", if neg { '-' } else { '+' }))
        .collect::<Vec<_>>()
        .join(",")
}

#[derive(Default)]
struct Parser {
    line: usize,
}

impl Parser {
    fn err(&self, message: impl Into<String>) -> ScheduleParseError {
        ScheduleParseError { line: self.line, message: message.into() }
    }

    fn field<'a>(&self, tok: Option<&'a str>, key: &str) -> Result<&'a str, ScheduleParseError> {
        tok.and_then(|t| t.strip_prefix(key)?.strip_prefix('='))
            .ok_or_else(|| self.err(format!("expected `{key}=`")))
    }

    fn num<T: std::str::FromStr>(&self, s: &str) -> Result<T, ScheduleParseError> {
        s.parse().map_err(|_| self.err(format!("bad number `{s}`")))
    }

    fn list(&self, s: &str) -> Result<Vec<usize>, ScheduleParseError> {
        if s.is_empty() {
            return Ok(Vec::new());
        }
        s.split(',').map(|x| self.num(x)).collect()
    }

    fn floats(&self, s: &str) -> Result<Vec<f64>, ScheduleParseError> {
        if s.is_empty() {
            return Ok(Vec::new());
        }
        s.split(',').map(|x| self.num(x)).collect()
    }

    fn terms(&self, s: &str) -> Result<Terms, ScheduleParseError> {
        if s.is_empty() {
            return Ok(Vec::new());
        }
        s.split(',')
            .map(|t| match t.split_at_checked(1) {
                Some(("+", rest)) => Ok((self.num(rest)?, false)),
                Some(("-", rest)) => Ok((self.num(rest)?, true)),
                _ => Err(self.err(format!("bad term `{t}`"))),
            })
            .collect()
    }

    fn opt_slot(&self, s: &str) -> Result<Option<usize>, ScheduleParseError> {
        if s == "-" {
            Ok(None)
        } else {
            self.num(s).map(Some)
        }
    }

    fn run(&mut self, text: &str) -> Result<ScheduleProgram, ScheduleParseError> {
        let mut lines = text.lines();
        self.line = 1;
        let header = lines.next().ok_or_else(|| self.err("empty schedule"))?;
        let mut h = header.split(' ');
        if h.next() != Some("CGMSCHED") || h.next() != Some("v1") {
            return Err(self.err("expected `CGMSCHED v1` header"));
        }
        let profile = h.next().ok_or_else(|| self.err("missing profile"))?.to_string();
        let layer_count: usize = self.num(self.field(h.next(), "layers")?)?;
        let width: usize = self.num(self.field(h.next(), "width")?)?;
        let mut p = ScheduleProgram {
            profile,
            width,
            dt: 0.0,
            steps: 0,
            extent: 0,
            nodes: 0,
            a_base: 0,
            lu_base: 0,
            counter: 0,
            symbolic: Symbolic {
                n: 0,
                perm: Vec::new(),
                row_ptr: vec![0],
                cols: Vec::new(),
                diag: Vec::new(),
                a_map: Vec::new(),
            },
            stamp: Vec::new(),
            rhs: Vec::new(),
            comps: Vec::new(),
            channels: Vec::new(),
            init: Vec::new(),
            layers: Vec::new(),
        };
        let mut ended = false;
        for raw in lines {
            self.line += 1;
            if ended {
                return Err(self.err("content after END"));
            }
            let (tag, rest) = raw.split_once(' ').unwrap_or((raw, ""));
            let mut t = rest.split(' ').filter(|s| !s.is_empty());
            match tag {
                "META" => {
                    p.dt = self.num(self.field(t.next(), "dt")?)?;
                    p.steps = self.num(self.field(t.next(), "steps")?)?;
                    p.extent = self.num(self.field(t.next(), "extent")?)?;
                    p.nodes = self.num(self.field(t.next(), "nodes")?)?;
                    p.a_base = self.num(self.field(t.next(), "a_base")?)?;
                    p.lu_base = self.num(self.field(t.next(), "lu_base")?)?;
                    p.counter = self.num(self.field(t.next(), "counter")?)?;
                }
                "LUPERM" => {
                    p.symbolic.perm = t.map(|x| self.num(x)).collect::<Result<_, _>>()?;
                    p.symbolic.n = p.symbolic.perm.len();
                }
                "LUROW" => {
                    let r: usize = self.num(t.next().unwrap_or(""))?;
                    if r != p.symbolic.diag.len() {
                        return Err(self.err("LUROW out of order"));
                    }
                    let d: usize = self.num(self.field(t.next(), "diag")?)?;
                    let cols = self.list(self.field(t.next(), "cols")?)?;
                    let start = p.symbolic.cols.len();
                    p.symbolic.diag.push(start + d);
                    p.symbolic.cols.extend(cols);
                    p.symbolic.row_ptr.push(p.symbolic.cols.len());
                }
                "LUAMAP" => {
                    p.symbolic.a_map = t.map(|x| self.num(x)).collect::<Result<_, _>>()?;
                }
                "STAMP" => {
                    let _e: usize = self.num(t.next().unwrap_or(""))?;
                    p.stamp.push(self.terms(self.field(t.next(), "terms")?)?);
                }
                "RHS" => {
                    let _r: usize = self.num(t.next().unwrap_or(""))?;
                    p.rhs.push(self.terms(self.field(t.next(), "terms")?)?);
                }
                "COMP" => {
                    let _c: usize = self.num(t.next().unwrap_or(""))?;
                    let a = self.opt_slot(self.field(t.next(), "a")?)?;
                    let b = self.opt_slot(self.field(t.next(), "b")?)?;
                    let mut f = |k: &str| -> Result<usize, ScheduleParseError> {
                        let v = self.field(t.next(), k)?;
                        self.num(v)
                    };
                    let (g, h, s, v, i) = (f("g")?, f("h")?, f("s")?, f("v")?, f("i")?);
                    p.comps.push(CompRecord { a, b, g, h, s, v, i });
                }
                "CHANNEL" => {
                    let (slot, name) = rest
                        .split_once(" name=")
                        .ok_or_else(|| self.err("expected `slot=<s> name=<name>`"))?;
                    let slot = self.num(slot.strip_prefix("slot=").ok_or_else(|| self.err("expected `slot=`"))?)?;
                    p.channels.push((name.to_string(), slot));
                }
                "INIT" => {
                    let slot: usize = self.num(t.next().unwrap_or(""))?;
                    let lanes = t.map(|x| self.num(x)).collect::<Result<Vec<f64>, _>>()?;
                    if lanes.len() != p.width {
                        return Err(self.err("INIT lane count differs from width"));
                    }
                    p.init.push((slot, lanes));
                }
                "LAYER" => {
                    let li: usize = self.num(t.next().unwrap_or(""))?;
                    if li != p.layers.len() {
                        return Err(self.err("LAYER out of order"));
                    }
                    p.layers.push(Vec::new());
                }
                "GROUP" => {
                    let kind_s = self.field(t.next(), "kind")?;
                    let kind = ProcessKind::parse(kind_s)
                        .ok_or_else(|| self.err(format!("unknown kind `{kind_s}`")))?;
                    let _count: usize = self.num(self.field(t.next(), "count")?)?;
                    let lane_base = self.num(self.field(t.next(), "lane_base")?)?;
                    p.layers
                        .last_mut()
                        .ok_or_else(|| self.err("GROUP before LAYER"))?
                        .push(ScheduleGroup { kind, lane_base, procs: Vec::new() });
                }
                "P" => {
                    let (head, name) =
                        rest.split_once(" name=").ok_or_else(|| self.err("missing `name=`"))?;
                    let mut t = head.split(' ');
                    let id = self.num(t.next().unwrap_or(""))?;
                    let _lane: usize = self.num(self.field(t.next(), "lane")?)?;
                    let slots = self.list(self.field(t.next(), "slots")?)?;
                    let consts = self.floats(self.field(t.next(), "const")?)?;
                    let group = p
                        .layers
                        .last_mut()
                        .and_then(|l| l.last_mut())
                        .ok_or_else(|| self.err("P before GROUP"))?;
                    group.procs.push(ProcessRecord { id, name: name.to_string(), slots, consts });
                }
                "END" => ended = true,
                other => return Err(self.err(format!("unknown record `{other}`"))),
            }
        }
        if !ended {
            return Err(self.err("missing END"));
        }
        if p.layers.len() != layer_count {
            return Err(self.err(format!("header declares {layer_count} layers, found {}", p.layers.len())));
        }
        Ok(p)
    }
}
