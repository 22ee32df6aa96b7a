//! Structural checks run before compilation. Problems are reported as data.

use std::collections::BTreeMap;

use serde::Serialize;

use super::{BlockKind, ComponentKind, CouplingDirection, NetworkModel, GROUND};
use crate::graph::Digraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum IssueCode {
    /// Node reached by a single branch terminal whose far end is not ground.
    FloatingNode,
    /// Conductively connected node set with no path to ground.
    UngroundedIsland,
    /// Cycle among direct-feedthrough control blocks; the compiler inserts
    /// a one-step delay.
    AlgebraicLoopPresent,
    /// Cycle made only of delay blocks reading one another.
    DelayOnlyLoop,
    /// Controlled source without an actuator.
    UndrivenSource,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Issue {
    pub severity: Severity,
    pub code: IssueCode,
    pub subject: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn has_errors(&self) -> bool {
        self.issues.iter().any(|i| i.severity == Severity::Error)
    }

    pub fn codes(&self) -> Vec<IssueCode> {
        self.issues.iter().map(|i| i.code).collect()
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

pub fn validate(model: &NetworkModel) -> ValidationReport {
    let mut issues = Vec::new();
    let index = model.node_index();
    let n = model.nodes.len();
    // slot n is ground
    let slot = |id: &str| if id == GROUND { n } else { index[id] };

    let mut degree = vec![0usize; n + 1];
    let mut uf = UnionFind((0..=n).collect());
    // a terminal counts towards its node's degree unless the branch ends on
    // ground, which anchors the node by itself
    for c in &model.components {
        let a = slot(&c.terminals[0]);
        let b = slot(&c.terminals[1]);
        if a != b {
            degree[a] += if b == n { 2 } else { 1 };
            degree[b] += if a == n { 2 } else { 1 };
        }
        if c.kind.is_conductive() {
            uf.union(a, b);
        }
    }
    for (i, node) in model.nodes.iter().enumerate() {
        if degree[i] == 1 {
            issues.push(Issue {
                severity: Severity::Warning,
                code: IssueCode::FloatingNode,
                subject: node.clone(),
                message: format!("node `{node}` is reached by a single ungrounded branch terminal"),
            });
        }
    }
    let ground_root = uf.find(n);
    let mut islands: BTreeMap<usize, Vec<&str>> = BTreeMap::new();
    for (i, node) in model.nodes.iter().enumerate() {
        let r = uf.find(i);
        if r != ground_root {
            islands.entry(r).or_default().push(node);
        }
    }
    for members in islands.values() {
        issues.push(Issue {
            severity: Severity::Error,
            code: IssueCode::UngroundedIsland,
            subject: members[0].to_string(),
            message: format!("nodes {members:?} have no conductive path to ground"),
        });
    }

    let block_index: BTreeMap<&str, usize> =
        model.control_blocks.iter().enumerate().map(|(i, b)| (b.id.as_str(), i)).collect();
    let mut feedthrough = Digraph::new(model.control_blocks.len());
    let mut delays = Digraph::new(model.control_blocks.len());
    for (ci, b) in model.control_blocks.iter().enumerate() {
        for input in &b.inputs {
            let Some(&pi) = block_index.get(input.as_str()) else { continue };
            if b.direct_feedthrough() {
                feedthrough.add_edge(pi, ci);
            } else if model.control_blocks[pi].kind == BlockKind::Delay && pi != ci {
                delays.add_edge(pi, ci);
            }
        }
    }
    for comp in feedthrough.cyclic_components() {
        let ids: Vec<&str> = comp.iter().map(|&i| model.control_blocks[i].id.as_str()).collect();
        issues.push(Issue {
            severity: Severity::Warning,
            code: IssueCode::AlgebraicLoopPresent,
            subject: ids[0].to_string(),
            message: format!("direct-feedthrough cycle through {ids:?}"),
        });
    }
    for comp in delays.cyclic_components() {
        let ids: Vec<&str> = comp.iter().map(|&i| model.control_blocks[i].id.as_str()).collect();
        issues.push(Issue {
            severity: Severity::Error,
            code: IssueCode::DelayOnlyLoop,
            subject: ids[0].to_string(),
            message: format!("delay blocks {ids:?} only read one another"),
        });
    }

    for c in &model.components {
        if c.kind == ComponentKind::ControlledCurrentSource
            && !model.couplings.iter().any(|k| {
                k.direction == CouplingDirection::Actuator && k.electrical_ref == c.id
            })
        {
            issues.push(Issue {
                severity: Severity::Warning,
                code: IssueCode::UndrivenSource,
                subject: c.id.clone(),
                message: format!("controlled source `{}` has no actuator and stays at zero", c.id),
            });
        }
    }

    ValidationReport { issues }
}
