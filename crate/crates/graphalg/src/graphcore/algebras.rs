use std::sync::Arc;

use thiserror::Error;

use super::{geodesic, maximal_subtree, GraphError, SerreGraph, SpanningTree};
use crate::linalg::{CMat, CVec};
use crate::matalg::{AlgebraError, Counit, EmbeddingWithExpectation, MatrixStarAlgebra, StateFunctional};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgebraGraphError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("{context}: {source}")]
    Algebra {
        context: String,
        #[source]
        source: AlgebraError,
    },
    #[error("edge `{edge}`: {reason}")]
    EdgeData { edge: String, reason: String },
    #[error("counits do not match along edge `{edge}` (residual {residual:.3e})")]
    CounitMismatch { edge: String, residual: f64 },
    #[error("vertex `{vertex}` carries no counit")]
    MissingCounit { vertex: String },
}

/// A concrete algebra with its faithful state and optional counit.
#[derive(Debug, Clone)]
pub struct StatedAlgebra {
    pub algebra: Arc<MatrixStarAlgebra>,
    pub state: StateFunctional,
    pub counit: Option<Counit>,
    /// Names of the basis elements, used by word expressions.
    pub names: Vec<String>,
    /// Multiplication table when the algebra is a group algebra in the canonical basis.
    pub group_table: Option<Vec<Vec<usize>>>,
}

impl StatedAlgebra {
    pub fn dim(&self) -> usize {
        self.algebra.dim()
    }
}

/// Graph of finite-dimensional C*-algebras with faithful states.
#[derive(Debug, Clone)]
pub struct AlgebraGraph {
    pub graph: SerreGraph,
    pub tree: SpanningTree,
    pub vertices: Vec<StatedAlgebra>,
    /// Edge algebra of each edge; `e` and `ē` share the same data.
    pub edge_algebras: Vec<StatedAlgebra>,
    /// `s_e: B_e → A_{s(e)}` with its expectation, per edge.
    pub embeddings: Vec<EmbeddingWithExpectation>,
    transfer: Vec<CMat>,
    complement: Vec<CMat>,
}

impl AlgebraGraph {
    pub fn new(
        graph: SerreGraph,
        vertices: Vec<StatedAlgebra>,
        edge_algebras: Vec<StatedAlgebra>,
        embeddings: Vec<EmbeddingWithExpectation>,
        tree: Option<SpanningTree>,
    ) -> Result<Self, AlgebraGraphError> {
        let tree = match tree {
            Some(t) => t,
            None => maximal_subtree(&graph, 0)?,
        };
        let ne = graph.edge_count();
        if edge_algebras.len() != ne || embeddings.len() != ne || vertices.len() != graph.vertex_count() {
            return Err(AlgebraGraphError::EdgeData { edge: String::new(), reason: "data count does not match the graph".into() });
        }
        for e in 0..ne {
            let label = graph.edge(e).label.clone();
            let emb = &embeddings[e].embedding;
            if emb.source.dim() != edge_algebras[e].dim() {
                return Err(AlgebraGraphError::EdgeData { edge: label, reason: "embedding source is not the edge algebra".into() });
            }
            if emb.target.dim() != vertices[graph.source(e)].dim() {
                return Err(AlgebraGraphError::EdgeData {
                    edge: label,
                    reason: "embedding target is not the source vertex algebra".into(),
                });
            }
            if edge_algebras[graph.bar(e)].dim() != edge_algebras[e].dim() {
                return Err(AlgebraGraphError::EdgeData { edge: label, reason: "edge pair carries different edge algebras".into() });
            }
        }
        let mut transfer = Vec::with_capacity(ne);
        let mut complement = Vec::with_capacity(ne);
        for e in 0..ne {
            let s = &embeddings[e];
            let r = &embeddings[graph.bar(e)];
            transfer.push(r.embedding.map() * s.to_source());
            let d = s.expectation().nrows();
            complement.push(CMat::identity(d, d) - s.expectation());
        }
        Ok(AlgebraGraph { graph, tree, vertices, edge_algebras, embeddings, transfer, complement })
    }

    /// Base vertex `p₀`, the root of the maximal subtree.
    pub fn base(&self) -> usize {
        self.tree.root
    }

    pub fn vertex_algebra(&self, v: usize) -> &MatrixStarAlgebra {
        &self.vertices[v].algebra
    }

    pub fn vertex_dim(&self, v: usize) -> usize {
        self.vertices[v].dim()
    }

    /// `r_e∘s_e⁻¹∘E^s_e : A_{s(e)} → A_{r(e)}`.
    pub fn transfer(&self, e: usize) -> &CMat {
        &self.transfer[e]
    }

    /// `E^s_e` on `A_{s(e)}`.
    pub fn expectation(&self, e: usize) -> &CMat {
        self.embeddings[e].expectation()
    }

    /// `id − E^s_e` on `A_{s(e)}`.
    pub fn complement(&self, e: usize) -> &CMat {
        &self.complement[e]
    }

    /// `s_e` as a coordinate matrix.
    pub fn embed(&self, e: usize) -> &CMat {
        self.embeddings[e].embedding.map()
    }

    pub fn geodesic(&self, p: usize, q: usize) -> Vec<usize> {
        geodesic(&self.graph, &self.tree, p, q)
    }

    /// Verifies `ε_{s(e)}∘s_e = ε_e` for every edge.
    pub fn check_counits(&self) -> Result<(), AlgebraGraphError> {
        for (v, data) in self.vertices.iter().enumerate() {
            if data.counit.is_none() {
                return Err(AlgebraGraphError::MissingCounit { vertex: self.graph.vertex_label(v).to_string() });
            }
        }
        for e in 0..self.graph.edge_count() {
            let ev = self.vertices[self.graph.source(e)].counit.as_ref().expect("checked");
            let ee = self.edge_algebras[e]
                .counit
                .as_ref()
                .ok_or_else(|| AlgebraGraphError::CounitMismatch { edge: self.graph.edge(e).label.clone(), residual: f64::INFINITY })?;
            let lhs: CVec = self.embed(e).transpose() * ev.values();
            let residual = (lhs - ee.values()).norm();
            if residual > crate::matalg::CERT_TOL {
                return Err(AlgebraGraphError::CounitMismatch { edge: self.graph.edge(e).label.clone(), residual });
            }
        }
        Ok(())
    }

    pub fn has_counits(&self) -> bool {
        self.check_counits().is_ok()
    }

    pub fn is_classical(&self) -> bool {
        self.vertices.iter().all(|v| v.group_table.is_some())
            && self.edge_algebras.iter().all(|v| v.group_table.is_some())
            && (0..self.graph.edge_count()).all(|e| self.group_hom(e).is_some())
    }

    /// The edge embedding as a map of group elements, when it sends basis to basis.
    pub fn group_hom(&self, e: usize) -> Option<Vec<usize>> {
        let m = self.embed(e);
        (0..m.ncols())
            .map(|k| {
                let col = m.column(k);
                let hits: Vec<usize> = (0..col.len()).filter(|&r| col[r].norm() > 1e-12).collect();
                (hits.len() == 1 && (col[hits[0]] - crate::linalg::ONE).norm() < 1e-12).then(|| hits[0])
            })
            .collect()
    }

    /// The same algebraic data with another base vertex and its BFS-lex tree.
    pub fn rebased(&self, base: usize) -> Result<Self, AlgebraGraphError> {
        let tree = maximal_subtree(&self.graph, base)?;
        Ok(AlgebraGraph { tree, ..self.clone() })
    }

    /// The same algebraic data with a different orientation.
    pub fn reoriented(&self, positive: &[usize]) -> Result<Self, AlgebraGraphError> {
        let graph = self.graph.reoriented(positive)?;
        Ok(AlgebraGraph { graph, ..self.clone() })
    }
}
