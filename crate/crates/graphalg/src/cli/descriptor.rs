//! JSON graph descriptors.
//!
//! ```json
//! {
//!   "graph": {
//!     "vertices": ["p", "q"],
//!     "edges": [
//!       {"label": "e", "source": "p", "target": "q", "inverse": "ē"},
//!       {"label": "ē", "source": "q", "target": "p", "inverse": "e"}
//!     ],
//!     "orientation": ["e"]
//!   },
//!   "vertex_algebras": {
//!     "p": {"kind": "group", "table": [[0, 1], [1, 0]], "names": ["1", "g"]},
//!     "q": {"kind": "matrix", "ambient_dim": 1, "basis": [[[[1, 0]]]], "state": "haar"}
//!   },
//!   "edge_algebras": {"e": {"kind": "group", "table": [[0]]}},
//!   "embeddings": {"e": {"group": [0]}, "ē": [[[1, 0]]]}
//! }
//! ```
//!
//! Complex entries are `[re, im]` pairs or plain numbers. Embeddings list, for
//! each edge-basis element, its coordinates in the source vertex basis, or use
//! `{"group": [...]}` to send group elements to group elements.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Deserialize;
use thiserror::Error;

use crate::graphcore::{tree_from_edges, AlgebraGraph, AlgebraGraphError, EdgeSpec, SerreGraph, StatedAlgebra};
use crate::linalg::{CMat, CVec, C64, ONE, ZERO};
use crate::matalg::{
    build_group_algebra, conditional_expectation, Counit, Embedding, EmbeddingWithExpectation, MatrixStarAlgebra, StateFunctional,
};

#[derive(Debug, Error)]
pub enum DescriptorError {
    #[error("parse error: {reason}")]
    Parse { reason: String },
    #[error("schema error: {reason}")]
    Schema { reason: String },
    #[error("certification failed: {reason}")]
    Certification { reason: String },
}

impl DescriptorError {
    pub fn exit_code(&self) -> i32 {
        match self {
            DescriptorError::Parse { .. } | DescriptorError::Schema { .. } => 2,
            DescriptorError::Certification { .. } => 1,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Complex {
    Real(f64),
    Pair([f64; 2]),
}

impl Complex {
    fn value(&self) -> C64 {
        match *self {
            Complex::Real(r) => C64::new(r, 0.0),
            Complex::Pair([re, im]) => C64::new(re, im),
        }
    }
}

type RawMatrix = Vec<Vec<Complex>>;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeEntry {
    pub label: String,
    pub source: String,
    pub target: String,
    pub inverse: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSection {
    pub vertices: Vec<String>,
    pub edges: Vec<EdgeEntry>,
    #[serde(default)]
    pub orientation: Option<Vec<String>>,
    #[serde(default)]
    pub base: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum StateSpec {
    Named(String),
    Density(RawMatrix),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum AlgebraSpec {
    Group {
        table: Vec<Vec<usize>>,
        #[serde(default)]
        names: Option<Vec<String>>,
        #[serde(default)]
        state: Option<StateSpec>,
    },
    Matrix {
        ambient_dim: usize,
        basis: Vec<RawMatrix>,
        #[serde(default)]
        names: Option<Vec<String>>,
        #[serde(default)]
        state: Option<StateSpec>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum EmbeddingSpec {
    Group { group: Vec<usize> },
    Coordinates(Vec<Vec<Complex>>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDescriptor {
    pub graph: GraphSection,
    pub vertex_algebras: BTreeMap<String, AlgebraSpec>,
    pub edge_algebras: BTreeMap<String, AlgebraSpec>,
    pub embeddings: BTreeMap<String, EmbeddingSpec>,
    #[serde(default)]
    pub counits: BTreeMap<String, Vec<Complex>>,
    #[serde(default)]
    pub expectations: BTreeMap<String, RawMatrix>,
    #[serde(default)]
    pub tree: Option<Vec<String>>,
}

fn matrix(raw: &RawMatrix, rows: usize, cols: usize, what: &str) -> Result<CMat, DescriptorError> {
    if raw.len() != rows || raw.iter().any(|r| r.len() != cols) {
        return Err(DescriptorError::Schema { reason: format!("{what}: expected a {rows}×{cols} matrix") });
    }
    Ok(CMat::from_fn(rows, cols, |i, j| raw[i][j].value()))
}

fn cert(context: String) -> impl FnOnce(crate::matalg::AlgebraError) -> DescriptorError {
    move |e| DescriptorError::Certification { reason: format!("{context}: {e}") }
}

impl GraphDescriptor {
    pub fn from_json(text: &str) -> Result<Self, DescriptorError> {
        serde_json::from_str(text).map_err(|e| DescriptorError::Parse { reason: e.to_string() })
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self, DescriptorError> {
        let text = std::fs::read_to_string(path).map_err(|e| DescriptorError::Parse { reason: format!("{}: {e}", path.display()) })?;
        Self::from_json(&text)
    }

    fn algebra(&self, label: &str, spec: &AlgebraSpec) -> Result<StatedAlgebra, DescriptorError> {
        match spec {
            AlgebraSpec::Group { table, names, state } => {
                let g = build_group_algebra(label, table).map_err(cert(format!("algebra `{label}`")))?;
                let names = names.clone().unwrap_or_else(|| (0..table.len()).map(|i| i.to_string()).collect());
                if names.len() != table.len() {
                    return Err(DescriptorError::Schema { reason: format!("algebra `{label}`: wrong number of names") });
                }
                let state = match state {
                    None => g.state.clone(),
                    Some(s) => self.state(label, &g.algebra, s)?,
                };
                Ok(StatedAlgebra { algebra: Arc::new(g.algebra), state, counit: Some(g.counit), names, group_table: Some(table.clone()) })
            }
            AlgebraSpec::Matrix { ambient_dim, basis, names, state } => {
                let mats = basis
                    .iter()
                    .enumerate()
                    .map(|(i, b)| matrix(b, *ambient_dim, *ambient_dim, &format!("algebra `{label}` basis {i}")))
                    .collect::<Result<Vec<_>, _>>()?;
                let algebra = MatrixStarAlgebra::new(label, mats).map_err(cert(format!("algebra `{label}`")))?;
                let names = names.clone().unwrap_or_else(|| (0..basis.len()).map(|i| format!("b{i}")).collect());
                if names.len() != basis.len() {
                    return Err(DescriptorError::Schema { reason: format!("algebra `{label}`: wrong number of names") });
                }
                let state = match state {
                    None => StateFunctional::normalized_trace(&algebra),
                    Some(s) => self.state(label, &algebra, s)?,
                };
                Ok(StatedAlgebra { algebra: Arc::new(algebra), state, counit: None, names, group_table: None })
            }
        }
    }

    fn state(&self, label: &str, alg: &MatrixStarAlgebra, spec: &StateSpec) -> Result<StateFunctional, DescriptorError> {
        match spec {
            StateSpec::Named(n) if n == "haar" || n == "trace" => Ok(StateFunctional::normalized_trace(alg)),
            StateSpec::Named(n) => Err(DescriptorError::Schema { reason: format!("algebra `{label}`: unknown state `{n}`") }),
            StateSpec::Density(m) => {
                let n = alg.ambient_dim();
                let rho = matrix(m, n, n, &format!("state of `{label}`"))?;
                StateFunctional::new(alg, rho).map_err(cert(format!("state of `{label}`")))
            }
        }
    }

    /// Certifies every component and assembles the graph of algebras.
    pub fn build(&self) -> Result<AlgebraGraph, DescriptorError> {
        let schema = |e: crate::graphcore::GraphError| DescriptorError::Schema { reason: e.to_string() };
        let specs: Vec<EdgeSpec> = self
            .graph
            .edges
            .iter()
            .map(|e| EdgeSpec { label: e.label.clone(), source: e.source.clone(), target: e.target.clone(), inverse: e.inverse.clone() })
            .collect();
        let mut vertices = self.graph.vertices.clone();
        if let Some(b) = &self.graph.base {
            let i = vertices
                .iter()
                .position(|v| v == b)
                .ok_or_else(|| DescriptorError::Schema { reason: format!("unknown base vertex `{b}`") })?;
            let v = vertices.remove(i);
            vertices.insert(0, v);
        }
        let graph = SerreGraph::new(vertices, &specs, self.graph.orientation.as_deref()).map_err(schema)?;
        for key in self.vertex_algebras.keys() {
            if graph.vertex_id(key).is_none() {
                return Err(DescriptorError::Schema { reason: format!("vertex algebra for unknown vertex `{key}`") });
            }
        }
        let mut vdata = Vec::new();
        for v in 0..graph.vertex_count() {
            let l = graph.vertex_label(v);
            let spec =
                self.vertex_algebras.get(l).ok_or_else(|| DescriptorError::Schema { reason: format!("vertex `{l}` has no algebra") })?;
            let mut a = self.algebra(l, spec)?;
            if let Some(cu) = self.counits.get(l) {
                let vals = CVec::from_iterator(cu.len(), cu.iter().map(Complex::value));
                a.counit = Some(Counit::new(&a.algebra, vals).map_err(cert(format!("counit of `{l}`")))?);
            }
            vdata.push(a);
        }
        for key in self.edge_algebras.keys().chain(self.embeddings.keys()).chain(self.expectations.keys()) {
            if graph.edge_id(key).is_none() {
                return Err(DescriptorError::Schema { reason: format!("data for unknown edge `{key}`") });
            }
        }
        let mut pair_alg: BTreeMap<usize, StatedAlgebra> = BTreeMap::new();
        for e in graph.positive_edges() {
            let (l, lb) = (graph.edge(e).label.clone(), graph.edge(graph.bar(e)).label.clone());
            let spec = match (self.edge_algebras.get(&l), self.edge_algebras.get(&lb)) {
                (Some(s), None) | (None, Some(s)) => s,
                (Some(_), Some(_)) => {
                    return Err(DescriptorError::Schema { reason: format!("edge pair `{l}`/`{lb}` has two edge algebras") })
                }
                (None, None) => return Err(DescriptorError::Schema { reason: format!("edge pair `{l}`/`{lb}` has no edge algebra") }),
            };
            let mut a = self.algebra(&l, spec)?;
            for key in [&l, &lb] {
                if let Some(cu) = self.counits.get(key.as_str()) {
                    let vals = CVec::from_iterator(cu.len(), cu.iter().map(Complex::value));
                    a.counit = Some(Counit::new(&a.algebra, vals).map_err(cert(format!("counit of `{key}`")))?);
                }
            }
            pair_alg.insert(e, a.clone());
            pair_alg.insert(graph.bar(e), a);
        }
        let mut edge_algs = Vec::new();
        let mut embeddings = Vec::new();
        for e in 0..graph.edge_count() {
            let l = graph.edge(e).label.clone();
            let b = pair_alg[&e].clone();
            let a = &vdata[graph.source(e)];
            let spec = self.embeddings.get(&l).ok_or_else(|| DescriptorError::Schema { reason: format!("edge `{l}` has no embedding") })?;
            let map = match spec {
                EmbeddingSpec::Group { group } => {
                    if group.len() != b.dim() || group.iter().any(|&g| g >= a.dim()) {
                        return Err(DescriptorError::Schema { reason: format!("embedding of `{l}`: bad group map") });
                    }
                    CMat::from_fn(a.dim(), b.dim(), |r, k| if group[k] == r { ONE } else { ZERO })
                }
                EmbeddingSpec::Coordinates(cols) => {
                    if cols.len() != b.dim() || cols.iter().any(|c| c.len() != a.dim()) {
                        return Err(DescriptorError::Schema {
                            reason: format!("embedding of `{l}`: expected {} coordinate vectors of length {}", b.dim(), a.dim()),
                        });
                    }
                    CMat::from_fn(a.dim(), b.dim(), |r, k| cols[k][r].value())
                }
            };
            let emb = Embedding::new(b.algebra.clone(), a.algebra.clone(), map).map_err(cert(format!("embedding of `{l}`")))?;
            let ewe = match self.expectations.get(&l) {
                Some(raw) => {
                    let m = matrix(raw, a.dim(), a.dim(), &format!("expectation of `{l}`"))?;
                    EmbeddingWithExpectation::certify(emb, m, &a.state, &b.state)
                }
                None => conditional_expectation(emb, &a.state, &b.state),
            }
            .map_err(cert(format!("expectation of `{l}`")))?;
            edge_algs.push(b);
            embeddings.push(ewe);
        }
        let tree = match &self.tree {
            None => None,
            Some(list) => {
                let ids = list
                    .iter()
                    .map(|l| graph.edge_id(l).ok_or_else(|| DescriptorError::Schema { reason: format!("tree edge `{l}` unknown") }))
                    .collect::<Result<Vec<_>, _>>()?;
                Some(tree_from_edges(&graph, 0, &ids).map_err(schema)?)
            }
        };
        AlgebraGraph::new(graph, vdata, edge_algs, embeddings, tree).map_err(|e| match e {
            AlgebraGraphError::Graph(g) => DescriptorError::Schema { reason: g.to_string() },
            other => DescriptorError::Certification { reason: other.to_string() },
        })
    }
}

/// Parses and certifies a descriptor.
pub fn load(text: &str) -> Result<AlgebraGraph, DescriptorError> {
    GraphDescriptor::from_json(text)?.build()
}
