//! Splitting a graph-valued initial point into subproblems, and lifting
//! subproblem moves back to the parent coordinates.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::Move;
use crate::error::{Error, Result};
use crate::models::{build_design_matrix, edge_index, DesignMatrix, ModelFamily, ModelSpec};
use crate::point::{FiberPoint, Label};

/// Smallest vertex set kept as a subproblem.
pub const MIN_SUBPROBLEM_NODES: usize = 3;

/// Simple undirected graph on `0..nodes`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    nodes: usize,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    /// Self-loops are rejected; duplicate edges are merged.
    pub fn new(nodes: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b || a >= nodes || b >= nodes {
                return Err(Error::Validation(format!(
                    "edge ({a}, {b}) is not a pair of distinct nodes below {nodes}"
                )));
            }
            set.insert((a.min(b), a.max(b)));
        }
        Ok(Self { nodes, edges: set.into_iter().collect() })
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    fn adjacency(&self, skip: &BTreeSet<(usize, usize)>) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes];
        for &(a, b) in self.edges.iter().filter(|e| !skip.contains(e)) {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    /// Edge-indicator vector over all node pairs in lexicographic order.
    pub fn indicator(&self) -> Vec<i64> {
        let mut v = vec![0; self.nodes * self.nodes.saturating_sub(1) / 2];
        for &(a, b) in &self.edges {
            v[edge_index(self.nodes, a, b)] = 1;
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Strategy {
    ConnectedComponents,
    /// Components of the k-core.
    KCore(usize),
    /// Components left after deleting every bridge.
    BridgeCuts,
    /// Explicit, pairwise disjoint vertex sets.
    InducedSubgraphs(Vec<Vec<usize>>),
}

/// Induced beta-model subproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct SubProblem {
    /// Parent vertex ids, increasing.
    pub nodes: Vec<usize>,
    pub sub_matrix: DesignMatrix,
    pub sub_point: FiberPoint,
    /// Parent label of each sub column.
    pub column_map: Vec<Label>,
}

fn components(nodes: &[usize], adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let member: BTreeSet<usize> = nodes.iter().copied().collect();
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for &start in nodes {
        if !seen.insert(start) {
            continue;
        }
        let mut comp = vec![start];
        let mut stack = vec![start];
        while let Some(u) = stack.pop() {
            for &w in &adj[u] {
                if member.contains(&w) && seen.insert(w) {
                    comp.push(w);
                    stack.push(w);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

fn k_core(graph: &Graph, k: usize) -> Vec<usize> {
    let adj = graph.adjacency(&BTreeSet::new());
    let mut degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut removed = vec![false; graph.nodes];
    let mut queue: Vec<usize> = (0..graph.nodes).filter(|&v| degree[v] < k).collect();
    for &v in &queue {
        removed[v] = true;
    }
    while let Some(v) = queue.pop() {
        for &w in &adj[v] {
            if !removed[w] {
                degree[w] -= 1;
                if degree[w] < k {
                    removed[w] = true;
                    queue.push(w);
                }
            }
        }
    }
    (0..graph.nodes).filter(|&v| !removed[v]).collect()
}

/// Bridges by iterative low-link DFS.
fn bridges(graph: &Graph) -> BTreeSet<(usize, usize)> {
    let adj = graph.adjacency(&BTreeSet::new());
    let n = graph.nodes;
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut out = BTreeSet::new();
    let mut time = 0;
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        // (vertex, parent, next neighbour position)
        let mut stack = vec![(root, usize::MAX, 0usize)];
        disc[root] = time;
        low[root] = time;
        time += 1;
        while let Some(top) = stack.len().checked_sub(1) {
            let (v, parent, pos) = stack[top];
            if pos < adj[v].len() {
                stack[top].2 += 1;
                let w = adj[v][pos];
                if w == parent {
                    continue;
                }
                if disc[w] == usize::MAX {
                    disc[w] = time;
                    low[w] = time;
                    time += 1;
                    stack.push((w, v, 0));
                } else {
                    low[v] = low[v].min(disc[w]);
                }
            } else {
                stack.pop();
                if parent != usize::MAX {
                    low[parent] = low[parent].min(low[v]);
                    if low[v] > disc[parent] {
                        out.insert((parent.min(v), parent.max(v)));
                    }
                }
            }
        }
    }
    out
}

fn subproblem(graph: &Graph, nodes: Vec<usize>, skip: &BTreeSet<(usize, usize)>) -> Result<SubProblem> {
    let m = nodes.len();
    let spec = ModelSpec::new(ModelFamily::BetaModel { nodes: m });
    let sub_matrix = build_design_matrix(&spec)?;
    let local: BTreeMap<usize, usize> = nodes.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut point = vec![0i64; sub_matrix.d()];
    for &(a, b) in graph.edges.iter().filter(|e| !skip.contains(e)) {
        if let (Some(&i), Some(&j)) = (local.get(&a), local.get(&b)) {
            point[edge_index(m, i, j)] = 1;
        }
    }
    let column_map = sub_matrix
        .column_labels()
        .iter()
        .map(|l| vec![nodes[l[0]], nodes[l[1]]])
        .collect();
    Ok(SubProblem { nodes, sub_matrix, sub_point: FiberPoint::new(point)?, column_map })
}

/// Splits the graph into vertex-disjoint induced beta-model subproblems;
/// parts with fewer than [`MIN_SUBPROBLEM_NODES`] vertices are dropped.
pub fn decompose_initial_point(graph: &Graph, strategy: &Strategy) -> Result<Vec<SubProblem>> {
    if graph.edges.is_empty() {
        return Err(Error::Validation("graph has no edges".into()));
    }
    let all: Vec<usize> = (0..graph.nodes).collect();
    let mut skip = BTreeSet::new();
    let parts: Vec<Vec<usize>> = match strategy {
        Strategy::ConnectedComponents => components(&all, &graph.adjacency(&skip)),
        Strategy::KCore(k) => components(&k_core(graph, *k), &graph.adjacency(&skip)),
        Strategy::BridgeCuts => {
            skip = bridges(graph);
            components(&all, &graph.adjacency(&skip))
        }
        Strategy::InducedSubgraphs(sets) => {
            let mut used = BTreeSet::new();
            let mut parts = Vec::new();
            for set in sets {
                let mut s: Vec<usize> = set.clone();
                s.sort_unstable();
                s.dedup();
                for &v in &s {
                    if v >= graph.nodes {
                        return Err(Error::Validation(format!("node {v} is not in the graph")));
                    }
                    if !used.insert(v) {
                        return Err(Error::Decomposition(format!("node {v} appears in two vertex sets")));
                    }
                }
                parts.push(s);
            }
            parts
        }
    };
    let out = parts
        .into_iter()
        .filter(|p| p.len() >= MIN_SUBPROBLEM_NODES)
        .map(|p| subproblem(graph, p, &skip))
        .collect::<Result<Vec<_>>>()?;
    if out.is_empty() {
        return Err(Error::Decomposition(format!(
            "no part with at least {MIN_SUBPROBLEM_NODES} nodes"
        )));
    }
    Ok(out)
}

/// Places sub-move entries at the matching parent labels and zeros elsewhere.
pub fn lift_move(sub_move: &Move, sub: &SubProblem, parent_labels: &[Label]) -> Result<Move> {
    lift_with_map(sub_move.as_slice(), &sub.column_map, parent_labels)
}

pub fn lift_with_map(sub_move: &[i64], column_map: &[Label], parent_labels: &[Label]) -> Result<Move> {
    if sub_move.len() != column_map.len() {
        return Err(Error::Lifting(format!(
            "move has {} entries but the column map has {}",
            sub_move.len(),
            column_map.len()
        )));
    }
    let position: BTreeMap<&[usize], usize> =
        column_map.iter().enumerate().map(|(i, l)| (l.as_slice(), i)).collect();
    let mut matched = 0;
    let lifted = parent_labels
        .iter()
        .map(|label| match position.get(label.as_slice()) {
            Some(&i) => {
                matched += 1;
                sub_move[i]
            }
            None => 0,
        })
        .collect();
    if matched != column_map.len() {
        return Err(Error::Lifting(format!(
            "{} sub labels have no parent column",
            column_map.len() - matched
        )));
    }
    Ok(Move(lifted))
}
