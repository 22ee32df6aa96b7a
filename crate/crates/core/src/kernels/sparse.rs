//! Nodal stamping and injection gathering with a fixed summation order.

use std::collections::BTreeMap;

use crate::model::{ComponentKind, NetworkModel, GROUND};

use super::companion::{companion_constants, norton, BranchState, CompanionModel};

/// Compressed-row conductance matrix over the non-ground nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseConductanceMatrix {
    pub dimension: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseConductanceMatrix {
    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.dimension]; self.dimension];
        for r in 0..self.dimension {
            for e in self.row_ptr[r]..self.row_ptr[r + 1] {
                d[r][self.col_idx[e]] = self.values[e];
            }
        }
        d
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dimension)
            .map(|r| {
                (self.row_ptr[r]..self.row_ptr[r + 1]).fold(0.0, |acc, e| {
                    acc + self.values[e] * x[self.col_idx[e]]
                })
            })
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Signed references to per-source values. `true` marks a subtraction.
pub type Terms = Vec<(usize, bool)>;

/// Sum of signed terms starting from `0.0`, in list order.
#[inline]
pub fn signed_sum(terms: &[(usize, bool)], get: impl Fn(usize) -> f64) -> f64 {
    let mut acc = 0.0;
    for &(src, neg) in terms {
        if neg {
            acc -= get(src);
        } else {
            acc += get(src);
        }
    }
    acc
}

fn terminal_index(index: &BTreeMap<&str, usize>, node: &str) -> Option<usize> {
    if node == GROUND {
        None
    } else {
        Some(index[node])
    }
}

/// Node pair of every component (ground as `None`).
pub fn terminal_pairs(model: &NetworkModel) -> Vec<(Option<usize>, Option<usize>)> {
    let index = model.node_index();
    model
        .components
        .iter()
        .map(|c| (terminal_index(&index, &c.terminals[0]), terminal_index(&index, &c.terminals[1])))
        .collect()
}

/// Where each matrix entry's value comes from: a list of signed
/// conductance sources per CSR entry, in ascending component-id order.
#[derive(Debug, Clone, PartialEq)]
pub struct StampPlan {
    pub dimension: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub terms: Vec<Terms>,
}

impl StampPlan {
    pub fn new(model: &NetworkModel) -> Self {
        let pairs = terminal_pairs(model);
        let mut entries: BTreeMap<(usize, usize), Terms> = BTreeMap::new();
        for ci in model.component_order() {
            if !model.components[ci].kind.is_conductive() {
                continue;
            }
            match pairs[ci] {
                (Some(a), Some(b)) if a == b => {}
                (Some(a), Some(b)) => {
                    entries.entry((a, a)).or_default().push((ci, false));
                    entries.entry((b, b)).or_default().push((ci, false));
                    entries.entry((a, b)).or_default().push((ci, true));
                    entries.entry((b, a)).or_default().push((ci, true));
                }
                (Some(a), None) | (None, Some(a)) => {
                    entries.entry((a, a)).or_default().push((ci, false));
                }
                (None, None) => {}
            }
        }
        let n = model.nodes.len();
        let mut row_ptr = vec![0; n + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut terms = Vec::with_capacity(entries.len());
        for ((r, c), t) in entries {
            row_ptr[r + 1] += 1;
            col_idx.push(c);
            terms.push(t);
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        StampPlan { dimension: n, row_ptr, col_idx, terms }
    }

    /// Rewrites term sources through `f` (component index to arena slot).
    pub fn remap(&self, f: impl Fn(usize) -> usize) -> Self {
        let mut out = self.clone();
        for t in &mut out.terms {
            for term in t.iter_mut() {
                term.0 = f(term.0);
            }
        }
        out
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn matrix(&self, conductance: impl Fn(usize) -> f64) -> SparseConductanceMatrix {
        SparseConductanceMatrix {
            dimension: self.dimension,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            values: self.terms.iter().map(|t| signed_sum(t, &conductance)).collect(),
        }
    }
}

/// Per-node signed injection sources in ascending component-id order.
#[derive(Debug, Clone, PartialEq)]
pub struct GatherPlan {
    pub nodes: Vec<Terms>,
}

impl GatherPlan {
    pub fn new(model: &NetworkModel) -> Self {
        let pairs = terminal_pairs(model);
        let mut nodes = vec![Vec::new(); model.nodes.len()];
        for ci in model.component_order() {
            let (a, b) = pairs[ci];
            if a == b {
                continue;
            }
            if let Some(a) = a {
                nodes[a].push((ci, false));
            }
            if let Some(b) = b {
                nodes[b].push((ci, true));
            }
        }
        GatherPlan { nodes }
    }

    pub fn remap(&self, f: impl Fn(usize) -> usize) -> Self {
        GatherPlan {
            nodes: self
                .nodes
                .iter()
                .map(|t| t.iter().map(|&(s, neg)| (f(s), neg)).collect())
                .collect(),
        }
    }

    pub fn gather(&self, injection: impl Fn(usize) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|t| signed_sum(t, &injection)).collect()
    }
}

/// Conductance matrix at `t = 0` with the given switch states (switches
/// not listed keep their document state).
pub fn assemble_conductance(
    model: &NetworkModel,
    dt: f64,
    switch_states: &BTreeMap<String, bool>,
) -> SparseConductanceMatrix {
    let g: Vec<f64> = model
        .components
        .iter()
        .map(|c| {
            let mut k = companion_constants(c);
            if c.kind == ComponentKind::Switch {
                if let Some(&closed) = switch_states.get(&c.id) {
                    k = vec![if closed { 1.0 } else { 0.0 }, f64::INFINITY];
                }
            }
            norton(c.kind, &k, BranchState::default(), 0.0, dt).0
        })
        .collect();
    StampPlan::new(model).matrix(|ci| g[ci])
}

/// Node injection vector from per-component companions given in model
/// order.
pub fn accumulate_injections(model: &NetworkModel, companions: &[CompanionModel]) -> Vec<f64> {
    GatherPlan::new(model).gather(|ci| companions[ci].injection())
}
