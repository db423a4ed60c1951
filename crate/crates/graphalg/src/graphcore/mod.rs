//! Serre graphs: edges come in pairs `e`, `ē` with `s(ē) = r(e)`.

mod algebras;

pub use algebras::{AlgebraGraph, AlgebraGraphError, StatedAlgebra};

use std::collections::{BTreeSet, VecDeque};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("unknown vertex `{label}`")]
    UnknownVertex { label: String },
    #[error("unknown edge `{label}`")]
    UnknownEdge { label: String },
    #[error("duplicate label `{label}`")]
    DuplicateLabel { label: String },
    #[error("edge `{edge}` has no involution partner")]
    MissingPartner { edge: String },
    #[error("edges `{edge}` and `{partner}` are not inverse to each other")]
    BadInvolution { edge: String, partner: String },
    #[error("graph is disconnected: vertex `{vertex}` is unreachable")]
    Disconnected { vertex: String },
    #[error("orientation must contain exactly one edge of each pair; pair `{edge}` violates this")]
    BadOrientation { edge: String },
    #[error("edge set is not a maximal subtree: {reason}")]
    NotATree { reason: String },
    #[error("edges do not compose at position {position}")]
    NotComposable { position: usize },
}

#[derive(Debug, Clone)]
pub struct Edge {
    pub label: String,
    pub source: usize,
    pub range: usize,
    pub bar: usize,
    pub positive: bool,
}

#[derive(Debug, Clone)]
pub struct SerreGraph {
    vertices: Vec<String>,
    edges: Vec<Edge>,
}

/// Input record for one direction of an edge pair.
#[derive(Debug, Clone)]
pub struct EdgeSpec {
    pub label: String,
    pub source: String,
    pub target: String,
    pub inverse: String,
}

impl SerreGraph {
    /// Builds the graph; `positive` lists one label of each pair, or defaults to
    /// the lexicographically smaller label.
    pub fn new(vertices: Vec<String>, edges: &[EdgeSpec], positive: Option<&[String]>) -> Result<Self, GraphError> {
        let mut seen = BTreeSet::new();
        for v in &vertices {
            if !seen.insert(v.clone()) {
                return Err(GraphError::DuplicateLabel { label: v.clone() });
            }
        }
        let vid = |l: &str| vertices.iter().position(|v| v == l).ok_or_else(|| GraphError::UnknownVertex { label: l.to_string() });
        let mut labels = BTreeSet::new();
        for e in edges {
            if !labels.insert(e.label.clone()) {
                return Err(GraphError::DuplicateLabel { label: e.label.clone() });
            }
        }
        let mut out = Vec::with_capacity(edges.len());
        for e in edges {
            let bar =
                edges.iter().position(|f| f.label == e.inverse).ok_or_else(|| GraphError::MissingPartner { edge: e.label.clone() })?;
            let partner = &edges[bar];
            if partner.inverse != e.label || partner.source != e.target || partner.target != e.source || partner.label == e.label {
                return Err(GraphError::BadInvolution { edge: e.label.clone(), partner: partner.label.clone() });
            }
            out.push(Edge { label: e.label.clone(), source: vid(&e.source)?, range: vid(&e.target)?, bar, positive: false });
        }
        match positive {
            Some(list) => {
                for l in list {
                    let i = out.iter().position(|e| &e.label == l).ok_or_else(|| GraphError::UnknownEdge { label: l.clone() })?;
                    out[i].positive = true;
                }
                for e in &out {
                    if e.positive == out[e.bar].positive {
                        return Err(GraphError::BadOrientation { edge: e.label.clone() });
                    }
                }
            }
            None => {
                for i in 0..out.len() {
                    let b = out[i].bar;
                    out[i].positive = out[i].label < out[b].label;
                }
            }
        }
        let g = SerreGraph { vertices, edges: out };
        g.check_connected()?;
        Ok(g)
    }

    fn check_connected(&self) -> Result<(), GraphError> {
        let mut seen = vec![false; self.vertices.len()];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(v) = queue.pop_front() {
            for e in self.edges.iter().filter(|e| e.source == v) {
                if !seen[e.range] {
                    seen[e.range] = true;
                    queue.push_back(e.range);
                }
            }
        }
        match seen.iter().position(|s| !s) {
            Some(i) => Err(GraphError::Disconnected { vertex: self.vertices[i].clone() }),
            None => Ok(()),
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertex_label(&self, v: usize) -> &str {
        &self.vertices[v]
    }

    pub fn vertex_id(&self, label: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v == label)
    }

    pub fn edge_id(&self, label: &str) -> Option<usize> {
        self.edges.iter().position(|e| e.label == label)
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn source(&self, e: usize) -> usize {
        self.edges[e].source
    }

    pub fn range(&self, e: usize) -> usize {
        self.edges[e].range
    }

    pub fn bar(&self, e: usize) -> usize {
        self.edges[e].bar
    }

    pub fn is_positive(&self, e: usize) -> bool {
        self.edges[e].positive
    }

    pub fn is_loop(&self, e: usize) -> bool {
        self.edges[e].source == self.edges[e].range
    }

    pub fn positive_edges(&self) -> Vec<usize> {
        let mut v: Vec<usize> = (0..self.edges.len()).filter(|&e| self.is_positive(e)).collect();
        v.sort_by(|&a, &b| self.edges[a].label.cmp(&self.edges[b].label));
        v
    }

    /// Edges leaving `v`, sorted by label.
    pub fn out_edges(&self, v: usize) -> Vec<usize> {
        let mut out: Vec<usize> = (0..self.edges.len()).filter(|&e| self.edges[e].source == v).collect();
        out.sort_by(|&a, &b| self.edges[a].label.cmp(&self.edges[b].label));
        out
    }

    /// Same graph with a different orientation.
    pub fn reoriented(&self, positive: &[usize]) -> Result<Self, GraphError> {
        let mut g = self.clone();
        for e in g.edges.iter_mut() {
            e.positive = false;
        }
        for &e in positive {
            g.edges[e].positive = true;
        }
        for e in &g.edges {
            if e.positive == g.edges[e.bar].positive {
                return Err(GraphError::BadOrientation { edge: e.label.clone() });
            }
        }
        Ok(g)
    }

    /// End vertex of a path starting at `start`, checking composability.
    pub fn walk(&self, start: usize, path: &[usize]) -> Result<usize, GraphError> {
        let mut v = start;
        for (i, &e) in path.iter().enumerate() {
            if self.edges[e].source != v {
                return Err(GraphError::NotComposable { position: i });
            }
            v = self.edges[e].range;
        }
        Ok(v)
    }

    pub fn path_label(&self, path: &[usize]) -> String {
        if path.is_empty() {
            return "∅".to_string();
        }
        path.iter().map(|&e| self.edges[e].label.as_str()).collect::<Vec<_>>().join(",")
    }
}

/// A maximal subtree, closed under the involution.
#[derive(Debug, Clone)]
pub struct SpanningTree {
    pub root: usize,
    pub edges: BTreeSet<usize>,
    parent: Vec<Option<usize>>,
}

impl SpanningTree {
    pub fn contains(&self, e: usize) -> bool {
        self.edges.contains(&e)
    }
}

/// Breadth-first tree from `root`, exploring edges in lexicographic order of
/// (source label, range label, edge label).
pub fn maximal_subtree(graph: &SerreGraph, root: usize) -> Result<SpanningTree, GraphError> {
    let n = graph.vertex_count();
    let mut parent: Vec<Option<usize>> = vec![None; n];
    let mut seen = vec![false; n];
    seen[root] = true;
    let mut queue = VecDeque::from([root]);
    let mut edges = BTreeSet::new();
    while let Some(v) = queue.pop_front() {
        let mut out = graph.out_edges(v);
        out.sort_by(|&a, &b| {
            let key = |e: usize| {
                (
                    graph.vertex_label(graph.source(e)).to_string(),
                    graph.vertex_label(graph.range(e)).to_string(),
                    graph.edge(e).label.clone(),
                )
            };
            key(a).cmp(&key(b))
        });
        for e in out {
            let w = graph.range(e);
            if !seen[w] {
                seen[w] = true;
                parent[w] = Some(e);
                edges.insert(e);
                edges.insert(graph.bar(e));
                queue.push_back(w);
            }
        }
    }
    if let Some(v) = seen.iter().position(|s| !s) {
        return Err(GraphError::Disconnected { vertex: graph.vertex_label(v).to_string() });
    }
    Ok(SpanningTree { root, edges, parent })
}

/// Tree from an explicit edge list (one or both directions per pair).
pub fn tree_from_edges(graph: &SerreGraph, root: usize, list: &[usize]) -> Result<SpanningTree, GraphError> {
    let mut edges = BTreeSet::new();
    for &e in list {
        if graph.is_loop(e) {
            return Err(GraphError::NotATree { reason: format!("loop `{}`", graph.edge(e).label) });
        }
        edges.insert(e);
        edges.insert(graph.bar(e));
    }
    if edges.len() != 2 * (graph.vertex_count() - 1) {
        return Err(GraphError::NotATree { reason: format!("{} edge pairs for {} vertices", edges.len() / 2, graph.vertex_count()) });
    }
    let n = graph.vertex_count();
    let mut parent = vec![None; n];
    let mut seen = vec![false; n];
    seen[root] = true;
    let mut queue = VecDeque::from([root]);
    while let Some(v) = queue.pop_front() {
        for e in graph.out_edges(v) {
            if !edges.contains(&e) {
                continue;
            }
            let w = graph.range(e);
            if !seen[w] {
                seen[w] = true;
                parent[w] = Some(e);
                queue.push_back(w);
            }
        }
    }
    if let Some(v) = seen.iter().position(|s| !s) {
        return Err(GraphError::NotATree { reason: format!("vertex `{}` not reached", graph.vertex_label(v)) });
    }
    Ok(SpanningTree { root, edges, parent })
}

/// The reduced tree path from `p` to `q`.
pub fn geodesic(graph: &SerreGraph, tree: &SpanningTree, p: usize, q: usize) -> Vec<usize> {
    let to_root = |mut v: usize| {
        let mut up = Vec::new();
        while let Some(e) = tree.parent[v] {
            up.push(graph.bar(e));
            v = graph.source(e);
        }
        up
    };
    let mut from_p = to_root(p);
    let mut from_q = to_root(q);
    while let (Some(&a), Some(&b)) = (from_p.last(), from_q.last()) {
        if a == b {
            from_p.pop();
            from_q.pop();
        } else {
            break;
        }
    }
    let mut path = from_p;
    path.extend(from_q.iter().rev().map(|&e| graph.bar(e)));
    path
}

/// Removes adjacent `e ē` pairs.
pub fn cancel_backtracks(graph: &SerreGraph, path: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    for &e in path {
        if out.last() == Some(&graph.bar(e)) {
            out.pop();
        } else {
            out.push(e);
        }
    }
    out
}

/// All composable paths of length at most `max_len` from `from`, ending at `to`
/// when given, in length-then-lexicographic order of edge labels.
pub fn enumerate_paths(graph: &SerreGraph, from: usize, to: Option<usize>, max_len: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut layer: Vec<(Vec<usize>, usize)> = vec![(Vec::new(), from)];
    for len in 0..=max_len {
        for (p, end) in &layer {
            if to.is_none_or(|t| t == *end) {
                out.push(p.clone());
            }
        }
        if len == max_len {
            break;
        }
        let mut next = Vec::new();
        for (p, end) in &layer {
            for e in graph.out_edges(*end) {
                let mut q = p.clone();
                q.push(e);
                next.push((q, graph.range(e)));
            }
        }
        layer = next;
    }
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub fn spec(label: &str, s: &str, t: &str, inv: &str) -> EdgeSpec {
        EdgeSpec { label: label.into(), source: s.into(), target: t.into(), inverse: inv.into() }
    }

    fn loop_graph() -> SerreGraph {
        SerreGraph::new(vec!["p".into()], &[spec("e", "p", "p", "ē"), spec("ē", "p", "p", "e")], None).unwrap()
    }

    fn segment() -> SerreGraph {
        SerreGraph::new(vec!["p".into(), "q".into()], &[spec("e", "p", "q", "ē"), spec("ē", "q", "p", "e")], None).unwrap()
    }

    #[test]
    fn default_orientation_and_involution() {
        let g = segment();
        let e = g.edge_id("e").unwrap();
        assert!(g.is_positive(e));
        assert!(!g.is_positive(g.bar(e)));
        assert_eq!(g.bar(g.bar(e)), e);
        assert_eq!(g.source(g.bar(e)), g.range(e));
    }

    #[test]
    fn missing_partner_is_rejected() {
        let err = SerreGraph::new(vec!["p".into(), "q".into()], &[spec("e", "p", "q", "f")], None).unwrap_err();
        assert!(matches!(err, GraphError::MissingPartner { .. }));
    }

    #[test]
    fn loop_tree_is_empty() {
        let g = loop_graph();
        let t = maximal_subtree(&g, 0).unwrap();
        assert!(t.edges.is_empty());
        assert!(geodesic(&g, &t, 0, 0).is_empty());
    }

    #[test]
    fn triangle_tree_uses_root_edges() {
        let g = SerreGraph::new(
            vec!["1".into(), "2".into(), "3".into()],
            &[
                spec("a", "1", "2", "A"),
                spec("A", "2", "1", "a"),
                spec("b", "2", "3", "B"),
                spec("B", "3", "2", "b"),
                spec("c", "1", "3", "C"),
                spec("C", "3", "1", "c"),
            ],
            None,
        )
        .unwrap();
        let t = maximal_subtree(&g, 0).unwrap();
        let names: BTreeSet<&str> = t.edges.iter().map(|&e| g.edge(e).label.as_str()).collect();
        assert_eq!(names, BTreeSet::from(["a", "A", "c", "C"]));
        let there = geodesic(&g, &t, 1, 2);
        let back = geodesic(&g, &t, 2, 1);
        assert_eq!(g.path_label(&there), "A,c");
        let mut joined = there.clone();
        joined.extend(back);
        assert!(cancel_backtracks(&g, &joined).is_empty());
    }

    #[test]
    fn loop_paths_of_length_two() {
        let g = loop_graph();
        let paths = enumerate_paths(&g, 0, Some(0), 2);
        let labels: Vec<String> = paths.iter().map(|p| g.path_label(p)).collect();
        assert_eq!(labels, ["∅", "e", "ē", "e,e", "e,ē", "ē,e", "ē,ē"]);
    }

    #[test]
    fn segment_paths_by_parity() {
        let g = segment();
        let paths = enumerate_paths(&g, 0, Some(1), 3);
        let labels: Vec<String> = paths.iter().map(|p| g.path_label(p)).collect();
        assert_eq!(labels, ["e", "e,ē,e"]);
        assert_eq!(enumerate_paths(&g, 0, Some(1), 0).len(), 0);
        assert_eq!(enumerate_paths(&g, 0, Some(0), 0).len(), 1);
    }
}
