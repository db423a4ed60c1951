//! Path Hilbert modules and their truncated GNS models.
//!
//! The space attached to a path `w = (e₁,…,e_n)` is built stage by stage: stage
//! `k` is the orthonormalized span of `H_{(e₁,…,e_k)}` with the last leg free.
//! Each stage keeps the algebra-valued Gram of its orthonormal vectors so that
//! the next stage only needs `r_e∘s_e⁻¹∘E_e` of that Gram. Legs sitting between
//! an edge and its reverse are spanned by `(id − E)(b)` for basis elements `b`.
//!
//! A block is the final stage of a path, orthonormalized for a chosen scalar
//! functional (`φ`, `ε` or `ε∘E_f`) on the last leg.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use thiserror::Error;

use crate::graphcore::{enumerate_paths, AlgebraGraph};
use crate::linalg::{self, kron, kron_vec, CMat, CVec, C64, ONE, ZERO};

/// Relative eigenvalue cutoff separating null vectors from genuine directions.
pub const NULL_CUTOFF: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PathError {
    #[error("tensors live on different paths")]
    PathMismatch,
    #[error("leg {position} has dimension {found}, expected {expected}")]
    LegMismatch { position: usize, expected: usize, found: usize },
    #[error("path does not compose at position {position}")]
    NotComposable { position: usize },
    #[error("vertex carries no counit")]
    MissingCounit,
}

/// Scalar functional applied to the last leg of a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Functional {
    /// The vertex state `φ_q`.
    State,
    /// The counit `ε_q`.
    Counit,
    /// `ε_{s(f)}∘E^s_f` for the edge `f`.
    CounitExpectation(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct StageKey {
    root: usize,
    prefix: Vec<usize>,
    projected: Option<usize>,
    functional: Functional,
}

/// One orthonormalized stage of a path chain.
#[derive(Debug)]
pub struct Stage {
    /// Vertex whose algebra holds the last leg.
    pub vertex: usize,
    /// Edge whose complement `id − E` spans the last leg, if any.
    pub projected: Option<usize>,
    pub prev_dim: usize,
    pub n_leg: usize,
    /// Leg spanning vectors, as columns in vertex coordinates.
    pub legs: CMat,
    /// Generator coefficients of the orthonormal vectors (`n_gen × dim`).
    pub coef: CMat,
    /// `coef* · G`: orthonormal coordinates of a generator combination.
    pub restrict: CMat,
    /// Algebra-valued Gram of the orthonormal vectors, one matrix per coordinate.
    xgram: Option<Vec<CMat>>,
}

impl Stage {
    pub fn dim(&self) -> usize {
        self.coef.ncols()
    }

    pub fn n_gen(&self) -> usize {
        self.coef.nrows()
    }

    /// Algebra-valued inner product of orthonormal vectors `a` and `b`.
    pub fn module_gram(&self, a: usize, b: usize) -> CVec {
        let x = self.xgram.as_ref().expect("faithful stage");
        CVec::from_iterator(x.len(), x.iter().map(|m| m[(a, b)]))
    }
}

/// Caches stages for one graph of algebras.
pub struct PathEngine<'g> {
    graph: &'g AlgebraGraph,
    cache: Mutex<HashMap<StageKey, Arc<Stage>>>,
}

impl<'g> PathEngine<'g> {
    pub fn new(graph: &'g AlgebraGraph) -> Self {
        PathEngine { graph, cache: Mutex::new(HashMap::new()) }
    }

    pub fn graph(&self) -> &'g AlgebraGraph {
        self.graph
    }

    /// Row vector of the functional on the algebra of vertex `q`.
    pub fn functional_row(&self, q: usize, functional: Functional) -> Result<CVec, PathError> {
        let v = &self.graph.vertices[q];
        Ok(match functional {
            Functional::State => v.state.values().clone(),
            Functional::Counit => v.counit.as_ref().ok_or(PathError::MissingCounit)?.values().clone(),
            Functional::CounitExpectation(f) => {
                let eps = v.counit.as_ref().ok_or(PathError::MissingCounit)?;
                self.graph.expectation(f).transpose() * eps.values()
            }
        })
    }

    fn projection_at(&self, path: &[usize], k: usize) -> Option<usize> {
        (k >= 1 && k < path.len() && path[k] == self.graph.graph.bar(path[k - 1])).then(|| path[k])
    }

    fn key(&self, root: usize, path: &[usize], k: usize, functional: Functional) -> StageKey {
        StageKey {
            root,
            prefix: path[..k].to_vec(),
            projected: self.projection_at(path, k),
            functional: if k == path.len() { functional } else { Functional::State },
        }
    }

    /// Stage `k` of the chain of `path` rooted at `root`, finishing with `functional`.
    pub fn stage(&self, root: usize, path: &[usize], k: usize, functional: Functional) -> Arc<Stage> {
        let key = self.key(root, path, k, functional);
        self.stage_by_key(&key)
    }

    /// Final stage of a path.
    pub fn block(&self, root: usize, path: &[usize], functional: Functional) -> Arc<Stage> {
        self.stage(root, path, path.len(), functional)
    }

    fn stage_by_key(&self, key: &StageKey) -> Arc<Stage> {
        if let Some(s) = self.cache.lock().expect("cache lock").get(key) {
            return s.clone();
        }
        let stage = Arc::new(self.compute(key));
        self.cache.lock().expect("cache lock").entry(key.clone()).or_insert(stage).clone()
    }

    fn compute(&self, key: &StageKey) -> Stage {
        let g = self.graph;
        let k = key.prefix.len();
        let vertex = if k == 0 { key.root } else { g.graph.range(key.prefix[k - 1]) };
        let alg = g.vertex_algebra(vertex);
        let d = alg.dim();
        let legs = match key.projected {
            Some(f) => g.complement(f).clone(),
            None => CMat::identity(d, d),
        };
        // y[c] : prev_dim × prev_dim, coordinate c of T(X_prev)
        let (prev_dim, y): (usize, Vec<CMat>) = if k == 0 {
            (1, (0..d).map(|c| CMat::from_element(1, 1, alg.unit()[c])).collect())
        } else {
            let prev_key = StageKey {
                root: key.root,
                prefix: key.prefix[..k - 1].to_vec(),
                projected: (k >= 2 && key.prefix[k - 1] == g.graph.bar(key.prefix[k - 2])).then(|| key.prefix[k - 1]),
                functional: Functional::State,
            };
            let prev = self.stage_by_key(&prev_key);
            let x = prev.xgram.as_ref().expect("intermediate stages are faithful");
            let t = g.transfer(key.prefix[k - 1]);
            let pd = prev.dim();
            let y = (0..d)
                .map(|c| {
                    let mut m = CMat::zeros(pd, pd);
                    for (cp, xm) in x.iter().enumerate() {
                        if t[(c, cp)] != ZERO {
                            m += xm * t[(c, cp)];
                        }
                    }
                    m
                })
                .collect();
            (pd, y)
        };
        // q[c][c'] : n_leg × n_leg, entry (l,l') = coordinate c of L_l* · b_{c'} · L_l'
        let lstar: Vec<CMat> = (0..d).map(|l| alg.left_matrix(&alg.star(&legs.column(l).into_owned()))).collect();
        let rights: Vec<CMat> = (0..d).map(|l| alg.right_matrix(&legs.column(l).into_owned())).collect();
        let mut q = vec![vec![CMat::zeros(d, d); d]; d];
        for l in 0..d {
            for lp in 0..d {
                let m = &lstar[l] * &rights[lp];
                for c in 0..d {
                    for cp in 0..d {
                        q[c][cp][(l, lp)] = m[(c, cp)];
                    }
                }
            }
        }
        let n_gen = prev_dim * d;
        let agram: Vec<CMat> = (0..d)
            .map(|c| {
                let mut m = CMat::zeros(n_gen, n_gen);
                for cp in 0..d {
                    if y[cp].iter().any(|z| *z != ZERO) {
                        m += kron(&y[cp], &q[c][cp]);
                    }
                }
                m
            })
            .collect();
        let psi = self.functional_row(vertex, key.functional).expect("functional availability is checked when building spaces");
        let mut gram = CMat::zeros(n_gen, n_gen);
        for c in 0..d {
            gram += &agram[c] * psi[c];
        }
        let gram = (&gram + gram.adjoint()) * linalg::c(0.5);
        let coef = linalg::orthonormalizer(&gram, NULL_CUTOFF);
        let restrict = coef.adjoint() * &gram;
        let xgram = (key.functional == Functional::State).then(|| agram.iter().map(|m| coef.adjoint() * m * &coef).collect());
        Stage { vertex, projected: key.projected, prev_dim, n_leg: d, legs, coef, restrict, xgram }
    }

    /// Orthonormal coordinates of `â₀ ⊗ a₁ ⊗ … ⊗ a_n` in the block of `path`.
    ///
    /// Legs at backtracking positions are read through `id − E`.
    pub fn tensor_coords(&self, root: usize, path: &[usize], functional: Functional, legs: &[CVec]) -> CVec {
        self.prefix_coords(root, path, functional, legs, path.len())
    }

    /// Orthonormal coordinates at stage `upto` of the chain of `path` for legs `0..=upto`.
    pub fn prefix_coords(&self, root: usize, path: &[usize], functional: Functional, legs: &[CVec], upto: usize) -> CVec {
        let mut v = CVec::from_element(1, ONE);
        for k in 0..=upto {
            let st = self.stage(root, path, k, functional);
            v = &st.restrict * kron_vec(&v, &legs[k]);
        }
        v
    }

    /// One Kronecker step: extends a map between stages to the next stages.
    ///
    /// `m` sends the orthonormal basis of `src`'s previous stage to that of `tgt`'s.
    pub fn step(&self, m: &CMat, src: &Stage, tgt: &Stage) -> CMat {
        let lambda = match (src.projected, tgt.projected) {
            (Some(f), None) => self.graph.complement(f).clone(),
            _ => CMat::identity(src.n_leg, src.n_leg),
        };
        &tgt.restrict * kron(m, &lambda) * &src.coef
    }

    /// Runs Kronecker steps from source stage `ks` and target stage `kt` until the
    /// source chain is exhausted.
    #[allow(clippy::too_many_arguments)]
    pub fn transfer(
        &self,
        mut m: CMat,
        src: (usize, &[usize], Functional),
        mut ks: usize,
        tgt: (usize, &[usize], Functional),
        mut kt: usize,
    ) -> CMat {
        while ks < src.1.len() {
            ks += 1;
            kt += 1;
            let s = self.stage(src.0, src.1, ks, src.2);
            let t = self.stage(tgt.0, tgt.1, kt, tgt.2);
            m = self.step(&m, &s, &t);
        }
        debug_assert_eq!(kt, tgt.1.len());
        m
    }
}

/// Algebra-valued inner product along a path by the defining recursion.
pub fn module_inner_product(graph: &AlgebraGraph, path: &[usize], a: &[CVec], b: &[CVec]) -> Result<CVec, PathError> {
    if a.len() != path.len() + 1 || b.len() != path.len() + 1 {
        return Err(PathError::PathMismatch);
    }
    let root = if path.is_empty() { None } else { Some(graph.graph.source(path[0])) };
    let verts: Vec<usize> = match root {
        None => {
            let v = (0..graph.graph.vertex_count()).find(|&v| graph.vertex_dim(v) == a[0].len()).ok_or(PathError::LegMismatch {
                position: 0,
                expected: 0,
                found: a[0].len(),
            })?;
            vec![v]
        }
        Some(r) => std::iter::once(r).chain(path.iter().map(|&e| graph.graph.range(e))).collect(),
    };
    for i in 1..path.len() {
        if graph.graph.source(path[i]) != graph.graph.range(path[i - 1]) {
            return Err(PathError::NotComposable { position: i });
        }
    }
    for (i, &v) in verts.iter().enumerate() {
        for x in [&a[i], &b[i]] {
            if x.len() != graph.vertex_dim(v) {
                return Err(PathError::LegMismatch { position: i, expected: graph.vertex_dim(v), found: x.len() });
            }
        }
    }
    let a0 = graph.vertex_algebra(verts[0]);
    let mut x = a0.mul(&a0.star(&a[0]), &b[0]);
    for k in 1..=path.len() {
        let alg = graph.vertex_algebra(verts[k]);
        let t = graph.transfer(path[k - 1]) * &x;
        x = alg.mul(&alg.mul(&alg.star(&a[k]), &t), &b[k]);
    }
    Ok(x)
}

/// `ψ(⟨a, b⟩)` for the functional on the last vertex.
pub fn scalar_inner_product(
    graph: &AlgebraGraph,
    path: &[usize],
    a: &[CVec],
    b: &[CVec],
    last_vertex: usize,
    functional: Functional,
) -> Result<C64, PathError> {
    let x = module_inner_product(graph, path, a, b)?;
    let row = PathEngine::new(graph).functional_row(last_vertex, functional)?;
    Ok(row.dot(&x))
}

/// One path block inside a truncated space.
#[derive(Debug, Clone)]
pub struct Block {
    pub path: Vec<usize>,
    pub offset: usize,
    pub stage: Arc<Stage>,
}

impl Block {
    pub fn dim(&self) -> usize {
        self.stage.dim()
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.dim()
    }
}

/// Orthonormal model of `⊕_{|w| ≤ D} H_w` for paths from `root` to `base`.
#[derive(Debug, Clone)]
pub struct TruncatedPathSpace {
    pub root: usize,
    pub base: usize,
    pub depth: usize,
    pub functional: Functional,
    pub blocks: Vec<Block>,
    index: HashMap<Vec<usize>, usize>,
    dim: usize,
}

impl TruncatedPathSpace {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn block(&self, path: &[usize]) -> Option<&Block> {
        self.index.get(path).map(|&i| &self.blocks[i])
    }

    /// Coordinates belonging to blocks of depth at most `max_len`.
    pub fn window(&self, max_len: usize) -> Vec<usize> {
        self.blocks.iter().filter(|b| b.path.len() <= max_len).flat_map(|b| b.range()).collect()
    }

    /// Per-coordinate path length.
    pub fn depths(&self) -> Vec<usize> {
        let mut out = vec![0; self.dim];
        for b in &self.blocks {
            for i in b.range() {
                out[i] = b.path.len();
            }
        }
        out
    }

    /// Embeds block coordinates into the whole space.
    pub fn embed(&self, path: &[usize], v: &CVec) -> CVec {
        let mut out = CVec::zeros(self.dim);
        if let Some(b) = self.block(path) {
            out.rows_mut(b.offset, b.dim()).copy_from(v);
        }
        out
    }
}

pub fn build_truncated_space(
    engine: &PathEngine,
    root: usize,
    base: usize,
    depth: usize,
    functional: Functional,
) -> Result<TruncatedPathSpace, PathError> {
    engine.functional_row(base, functional)?;
    if let Functional::CounitExpectation(f) = functional {
        if engine.graph().graph.source(f) != base {
            return Err(PathError::NotComposable { position: 0 });
        }
    }
    let paths = enumerate_paths(&engine.graph().graph, root, Some(base), depth);
    let mut blocks = Vec::new();
    let mut index = HashMap::new();
    let mut offset = 0;
    for path in paths {
        let stage = engine.block(root, &path, functional);
        if stage.dim() == 0 {
            continue;
        }
        index.insert(path.clone(), blocks.len());
        let dim = stage.dim();
        blocks.push(Block { path, offset, stage });
        offset += dim;
    }
    Ok(TruncatedPathSpace { root, base, depth, functional, blocks, index, dim: offset })
}

/// Block modular operator on `H_w` for a path from the base vertex to itself,
/// computed from `S(xΩ) = x*Ω`, next to the tensor product of vertex modular
/// operators. Returns the largest deviation between the two on spanning tensors.
pub fn modular_block_residual(engine: &PathEngine, path: &[usize]) -> f64 {
    use crate::matalg::modular_data;
    let g = engine.graph();
    let gr = &g.graph;
    let root = if path.is_empty() { g.base() } else { gr.source(path[0]) };
    let rev: Vec<usize> = path.iter().rev().map(|&e| gr.bar(e)).collect();
    let verts: Vec<usize> = std::iter::once(root).chain(path.iter().map(|&e| gr.range(e))).collect();
    let fwd = engine.block(root, path, Functional::State);
    let bwd = engine.block(root, &rev, Functional::State);
    if fwd.dim() == 0 {
        return 0.0;
    }
    let nablas: Vec<CMat> = verts
        .iter()
        .map(|&v| modular_data(g.vertex_algebra(v), &g.vertices[v].state).expect("vertex states are faithful").modular_on_coords())
        .collect();
    let monomials = spanning_monomials(engine, path, &verts);
    let mut c = CMat::zeros(fwd.dim(), monomials.len());
    let mut dcol = CMat::zeros(bwd.dim(), monomials.len());
    let mut tensor_nabla = CMat::zeros(fwd.dim(), monomials.len());
    for (j, legs) in monomials.iter().enumerate() {
        c.set_column(j, &engine.tensor_coords(root, path, Functional::State, legs));
        let star_legs: Vec<CVec> = legs.iter().zip(&verts).rev().map(|(x, &v)| g.vertex_algebra(v).star(x)).collect();
        dcol.set_column(j, &engine.tensor_coords(root, &rev, Functional::State, &star_legs));
        let nl: Vec<CVec> = legs.iter().zip(&nablas).map(|(x, n)| n * x).collect();
        tensor_nabla.set_column(j, &engine.tensor_coords(root, path, Functional::State, &nl));
    }
    // S(c_j) = d_j with S antilinear: S(v) = M conj(v)
    let m = &dcol * linalg::pinv(&linalg::conj_mat(&c));
    let nabla = linalg::conj_mat(&(m.adjoint() * &m));
    linalg::max_abs(&(nabla * c - tensor_nabla))
}

/// Basis monomials of a path, with legs at backtracking positions pushed through `id − E`.
pub fn spanning_monomials(engine: &PathEngine, path: &[usize], verts: &[usize]) -> Vec<Vec<CVec>> {
    let g = engine.graph();
    let mut out: Vec<Vec<CVec>> = vec![Vec::new()];
    for (k, &v) in verts.iter().enumerate() {
        let proj = engine.projection_at(path, k);
        let d = g.vertex_dim(v);
        let mut next = Vec::with_capacity(out.len() * d);
        for partial in &out {
            for l in 0..d {
                let leg = match proj {
                    Some(f) => g.complement(f).column(l).into_owned(),
                    None => linalg::unit_vector(d, l),
                };
                if leg.norm() < 1e-14 {
                    continue;
                }
                let mut p = partial.clone();
                p.push(leg);
                next.push(p);
            }
        }
        out = next;
    }
    out
}
