//! Directed-graph utilities shared by validation, the reference stepper and
//! the graph compiler: strongly connected components, topological order,
//! longest-path layering and deterministic cycle breaking.

use std::collections::BTreeSet;

/// Adjacency-list digraph over vertices `0..n`.
#[derive(Debug, Clone, Default)]
pub struct Digraph {
    succ: Vec<Vec<usize>>,
}

impl Digraph {
    pub fn new(n: usize) -> Self {
        Digraph { succ: vec![Vec::new(); n] }
    }

    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut g = Digraph::new(n);
        for (a, b) in edges {
            g.add_edge(a, b);
        }
        g
    }

    pub fn len(&self) -> usize {
        self.succ.len()
    }

    pub fn is_empty(&self) -> bool {
        self.succ.is_empty()
    }

    pub fn add_edge(&mut self, a: usize, b: usize) {
        self.succ[a].push(b);
    }

    pub fn successors(&self, v: usize) -> &[usize] {
        &self.succ[v]
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.succ.iter().enumerate().flat_map(|(a, s)| s.iter().map(move |&b| (a, b)))
    }

    /// Tarjan's algorithm, iterative. Components are returned in reverse
    /// topological order with members sorted ascending.
    pub fn strongly_connected_components(&self) -> Vec<Vec<usize>> {
        const UNVISITED: usize = usize::MAX;
        let n = self.len();
        let mut index = vec![UNVISITED; n];
        let mut low = vec![0; n];
        let mut on_stack = vec![false; n];
        let mut stack = Vec::new();
        let mut out = Vec::new();
        let mut next = 0;
        let mut call: Vec<(usize, usize)> = Vec::new();
        for root in 0..n {
            if index[root] != UNVISITED {
                continue;
            }
            call.push((root, 0));
            index[root] = next;
            low[root] = next;
            next += 1;
            stack.push(root);
            on_stack[root] = true;
            while let Some(&mut (v, ref mut pos)) = call.last_mut() {
                if let Some(&w) = self.succ[v].get(*pos) {
                    *pos += 1;
                    if index[w] == UNVISITED {
                        index[w] = next;
                        low[w] = next;
                        next += 1;
                        stack.push(w);
                        on_stack[w] = true;
                        call.push((w, 0));
                    } else if on_stack[w] {
                        low[v] = low[v].min(index[w]);
                    }
                    continue;
                }
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().expect("tarjan stack");
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    out.push(comp);
                }
            }
        }
        out
    }

    /// Components that contain a cycle (size > 1 or a self-loop).
    pub fn cyclic_components(&self) -> Vec<Vec<usize>> {
        self.strongly_connected_components()
            .into_iter()
            .filter(|c| c.len() > 1 || self.succ[c[0]].contains(&c[0]))
            .collect()
    }

    /// Kahn's algorithm with a smallest-index-first frontier; `None` if the
    /// graph has a cycle.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.len();
        let mut indeg = vec![0usize; n];
        for (_, b) in self.edges() {
            indeg[b] += 1;
        }
        let mut ready: BTreeSet<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = ready.pop_first() {
            order.push(v);
            for &w in &self.succ[v] {
                indeg[w] -= 1;
                if indeg[w] == 0 {
                    ready.insert(w);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    pub fn is_acyclic(&self) -> bool {
        self.topological_order().is_some()
    }

    /// Longest-path layer of every vertex (sources at 0); `None` on a cycle.
    pub fn longest_path_layers(&self) -> Option<Vec<usize>> {
        let order = self.topological_order()?;
        let mut layer = vec![0usize; self.len()];
        for v in order {
            for &w in &self.succ[v] {
                layer[w] = layer[w].max(layer[v] + 1);
            }
        }
        Some(layer)
    }
}

/// An edge removed to break a cycle, with the cycle-bearing component it
/// was chosen from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BrokenEdge {
    pub producer: usize,
    pub consumer: usize,
    pub members: Vec<usize>,
}

/// Removes edges until the graph is acyclic.
///
/// Repeatedly picks, inside each cyclic strongly connected component, the
/// edge whose consumer has the smallest index (ties: smallest producer).
/// Afterwards every removed edge whose reinsertion keeps the graph acyclic
/// is restored, so each remaining removal is necessary.
/// Returns the removed edges in removal order.
pub fn break_cycles(g: &Digraph) -> Vec<BrokenEdge> {
    let mut edges: BTreeSet<(usize, usize)> = g.edges().collect();
    let mut broken: Vec<BrokenEdge> = Vec::new();
    loop {
        let current = Digraph::from_edges(g.len(), edges.iter().copied());
        let cyclic = current.cyclic_components();
        if cyclic.is_empty() {
            break;
        }
        for comp in cyclic {
            let member: BTreeSet<usize> = comp.iter().copied().collect();
            let choice = edges
                .iter()
                .filter(|(a, b)| member.contains(a) && member.contains(b))
                .min_by_key(|&&(a, b)| (b, a))
                .copied()
                .expect("cyclic component has an internal edge");
            edges.remove(&choice);
            broken.push(BrokenEdge { producer: choice.0, consumer: choice.1, members: comp });
        }
    }
    let mut kept = Vec::new();
    for b in broken {
        edges.insert((b.producer, b.consumer));
        if Digraph::from_edges(g.len(), edges.iter().copied()).is_acyclic() {
            continue;
        }
        edges.remove(&(b.producer, b.consumer));
        kept.push(b);
    }
    kept
}
