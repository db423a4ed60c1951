//! Quantum Bass-Serre tree of a graph of algebras with counits.
//!
//! `L_r = ⊕_q L_{r,q}` is built from the counit `ε_q` at the end of each path,
//! `K̃_r = ℂΩ ⊕ ⊕_{f∈E⁺} K_{r,f}` from `ε_{s(f)}∘E_f`. Everything is truncated at
//! depth `D`, so identities are checked on interior windows: coordinates whose
//! images stay inside the truncation.

use std::sync::OnceLock;

use nalgebra::linalg::Schur;
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::fundamental::{act, act_word, edge_unitary, vacuum, Fundamental, FundamentalError, ReducedWordSum, SpaceSet, Word};
use crate::graphcore::{AlgebraGraph, AlgebraGraphError};
use crate::linalg::{self, c, kron, CMat, CVec, C64, ONE};
use crate::pathmod::{Functional, PathEngine};
use crate::report::{Check, SuiteReport};
use crate::sampling::WordSampler;

/// Eigenvalues this close to `-1` are read as exactly `-1` and sent to `π`.
pub const LOG_SNAP: f64 = 1e-9;
/// Eigenvalues between the snap radius and this radius have no trustworthy branch.
pub const LOG_AMBIGUOUS: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum BassSerreError {
    #[error("counit data unusable: {source}")]
    Counits {
        #[from]
        source: AlgebraGraphError,
    },
    #[error("eigenvalue {re:+.3e}{im:+.3e}i lies too close to -1 for a principal logarithm")]
    LogBranchAmbiguity { re: f64, im: f64 },
    #[error("word of length {length} does not fit an interior window at depth {depth}")]
    DomainExceeded { length: usize, depth: usize },
    #[error(transparent)]
    Fundamental(#[from] FundamentalError),
}

/// Offsets of the summands of a direct sum and the path length of each coordinate.
#[derive(Debug, Clone)]
struct Layout {
    offsets: Vec<usize>,
    depths: Vec<usize>,
}

impl Layout {
    fn dim(&self) -> usize {
        self.depths.len()
    }

    fn interior(&self, max_depth: usize) -> Vec<usize> {
        (0..self.dim()).filter(|&i| self.depths[i] <= max_depth).collect()
    }
}

fn place(out: &mut CMat, row: usize, col: usize, m: &CMat) {
    let mut view = out.view_mut((row, col), (m.nrows(), m.ncols()));
    view += m;
}

/// Principal logarithm of a unitary, with eigenvalue arguments in `(-π, π]`.
pub fn unitary_log(u: &CMat) -> Result<CMat, BassSerreError> {
    let n = u.nrows();
    if n == 0 {
        return Ok(CMat::zeros(0, 0));
    }
    let (q, t) = Schur::new(u.clone()).unpack();
    let mut d = CMat::zeros(n, n);
    for i in 0..n {
        let z = t[(i, i)];
        let gap = (z + ONE).norm();
        let arg = if gap <= LOG_SNAP {
            std::f64::consts::PI
        } else if gap <= LOG_AMBIGUOUS {
            return Err(BassSerreError::LogBranchAmbiguity { re: z.re, im: z.im });
        } else {
            z.arg()
        };
        d[(i, i)] = C64::new(z.norm().ln(), arg);
    }
    Ok(&q * d * q.adjoint())
}

/// `exp(i t h)` for Hermitian `h` given by its spectral decomposition.
fn exp_i(spectrum: &(Vec<f64>, CMat), t: f64) -> CMat {
    let (vals, vecs) = spectrum;
    let d = CVec::from_iterator(vals.len(), vals.iter().map(|&l| C64::from_polar(1.0, t * l)));
    let mut scaled = vecs.clone();
    for (mut col, z) in scaled.column_iter_mut().zip(d.iter()) {
        col *= *z;
    }
    linalg::mul(&scaled, &vecs.adjoint())
}

/// Swap of two orthonormal vectors, identity on their orthogonal complement.
fn swap(x: &CVec, y: &CVec) -> CMat {
    let n = x.len();
    CMat::identity(n, n) - x * x.adjoint() - y * y.adjoint() + x * y.adjoint() + y * x.adjoint()
}

/// Largest C*-norm of a vertex-algebra element.
fn element_norm(g: &AlgebraGraph, v: usize, a: &CVec) -> f64 {
    linalg::spectral_norm(&g.vertex_algebra(v).element(a))
}

/// Truncated spaces `L_r` and `K̃_r` for every root `r`.
pub struct BassSerreTree<'e, 'g> {
    engine: &'e PathEngine<'g>,
    depth: usize,
    positive: Vec<usize>,
    k_index: Vec<Option<usize>>,
    l: Vec<SpaceSet<'e, 'g>>,
    k: Vec<SpaceSet<'e, 'g>>,
    l_layout: Vec<Layout>,
    k_layout: Vec<Layout>,
    cache: OperatorCache,
}

/// Vertex operators on basis elements and undeformed edge unitaries, built on first use.
#[derive(Default)]
struct OperatorCache {
    pi: Vec<OnceLock<Vec<CMat>>>,
    rho: Vec<OnceLock<Vec<CMat>>>,
    u_l: Vec<OnceLock<CMat>>,
    u_k: Vec<OnceLock<CMat>>,
}

impl OperatorCache {
    fn new(vertices: usize, edges: usize) -> Self {
        OperatorCache {
            pi: (0..vertices).map(|_| OnceLock::new()).collect(),
            rho: (0..vertices).map(|_| OnceLock::new()).collect(),
            u_l: (0..edges).map(|_| OnceLock::new()).collect(),
            u_k: (0..edges).map(|_| OnceLock::new()).collect(),
        }
    }
}

fn cached<T: Clone>(slot: &OnceLock<T>, build: impl FnOnce() -> Result<T, BassSerreError>) -> Result<T, BassSerreError> {
    if let Some(v) = slot.get() {
        return Ok(v.clone());
    }
    let v = build()?;
    Ok(slot.get_or_init(|| v).clone())
}

fn combine(basis: &[CMat], a: &CVec) -> CMat {
    let mut out = CMat::zeros(basis[0].nrows(), basis[0].ncols());
    for (m, &z) in basis.iter().zip(a.iter()) {
        if z != C64::new(0.0, 0.0) {
            out += m * z;
        }
    }
    out
}

/// `F: L → K̃` (with zero `Ω` row) and `F̃ = F + |Ω⟩⟨ξ^L|`.
#[derive(Debug, Clone)]
pub struct JulgValette {
    pub f: CMat,
    pub f_tilde: CMat,
}

/// Rank and range of a commutator `Fπ(a) − ρ(a)F` on the interior window.
#[derive(Debug, Clone)]
pub struct CommutatorReport {
    pub rank: usize,
    pub bound: usize,
    /// Dimension of the predicted range.
    pub predicted: usize,
    /// `‖(I − Q)M‖` for `Q` the projector onto the predicted range.
    pub containment: f64,
    pub norm: f64,
}

/// Deformation data of one positive edge.
#[derive(Debug, Clone)]
pub struct EdgeDeformation {
    pub edge: usize,
    pub u_k: CMat,
    pub v: CMat,
    pub h: CMat,
    pub u_l: CMat,
    pub w: CMat,
    pub k: CMat,
    h_spec: (Vec<f64>, CMat),
    k_spec: (Vec<f64>, CMat),
}

/// The families `t ↦ v_e^t` and `t ↦ w_e^t` over all edges.
#[derive(Debug, Clone)]
pub struct Deformation {
    edges: Vec<Option<EdgeDeformation>>,
    bars: Vec<usize>,
}

impl Deformation {
    pub fn edge(&self, e: usize) -> &EdgeDeformation {
        self.edges[e].as_ref().or_else(|| self.edges[self.bars[e]].as_ref()).expect("every edge or its reverse is positive")
    }

    fn positive(&self, e: usize) -> bool {
        self.edges[e].is_some()
    }

    /// `v_e^t = u_e^K exp(ith_e)`, with `v_ē^t = (v_e^t)*`.
    pub fn v_t(&self, e: usize, t: f64) -> CMat {
        let d = self.edge(e);
        let m = linalg::mul(&d.u_k, &exp_i(&d.h_spec, t));
        if self.positive(e) {
            m
        } else {
            m.adjoint()
        }
    }

    /// `w_e^t = u_e^L exp(itk_e)`, with `w_ē^t = (w_e^t)*`.
    pub fn w_t(&self, e: usize, t: f64) -> CMat {
        let d = self.edge(e);
        let m = linalg::mul(&d.u_l, &exp_i(&d.k_spec, t));
        if self.positive(e) {
            m
        } else {
            m.adjoint()
        }
    }

    pub fn max_generator_norm(&self, e: usize) -> f64 {
        let d = self.edge(e);
        linalg::spectral_norm(&d.h).max(linalg::spectral_norm(&d.k))
    }
}

impl<'e, 'g> BassSerreTree<'e, 'g> {
    pub fn new(engine: &'e PathEngine<'g>, depth: usize) -> Result<Self, BassSerreError> {
        let g = engine.graph();
        g.check_counits()?;
        let nv = g.graph.vertex_count();
        let positive = g.graph.positive_edges();
        let mut k_index = vec![None; g.graph.edge_count()];
        for (i, &f) in positive.iter().enumerate() {
            k_index[f] = Some(i);
        }
        let l: Vec<SpaceSet> = (0..nv).map(|q| SpaceSet::new(engine, q, depth, Functional::Counit)).collect::<Result<_, _>>()?;
        let k: Vec<SpaceSet> = positive
            .iter()
            .map(|&f| SpaceSet::new(engine, g.graph.source(f), depth, Functional::CounitExpectation(f)))
            .collect::<Result<_, _>>()?;
        let l_layout = (0..nv)
            .map(|r| {
                let mut offsets = Vec::new();
                let mut depths = Vec::new();
                for set in &l {
                    offsets.push(depths.len());
                    depths.extend(set.root(r).depths());
                }
                Layout { offsets, depths }
            })
            .collect();
        let k_layout = (0..nv)
            .map(|r| {
                let mut offsets = Vec::new();
                let mut depths = vec![0];
                for set in &k {
                    offsets.push(depths.len());
                    depths.extend(set.root(r).depths());
                }
                Layout { offsets, depths }
            })
            .collect();
        Ok(BassSerreTree {
            engine,
            depth,
            positive,
            k_index,
            l,
            k,
            l_layout,
            k_layout,
            cache: OperatorCache::new(nv, g.graph.edge_count()),
        })
    }

    pub fn graph(&self) -> &'g AlgebraGraph {
        self.engine.graph()
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn base(&self) -> usize {
        self.graph().base()
    }

    pub fn l_dim(&self, r: usize) -> usize {
        self.l_layout[r].dim()
    }

    /// Dimension of `K̃_r`, including `Ω`.
    pub fn k_dim(&self, r: usize) -> usize {
        self.k_layout[r].dim()
    }

    pub fn l_depths(&self, r: usize) -> &[usize] {
        &self.l_layout[r].depths
    }

    pub fn k_depths(&self, r: usize) -> &[usize] {
        &self.k_layout[r].depths
    }

    /// Coordinates of `L_r` of depth at most `d`.
    pub fn l_interior(&self, r: usize, d: usize) -> Vec<usize> {
        self.l_layout[r].interior(d)
    }

    /// Coordinates of `K̃_r` of depth at most `d`, `Ω` included.
    pub fn k_interior(&self, r: usize, d: usize) -> Vec<usize> {
        self.k_layout[r].interior(d)
    }

    fn k_slot(&self, f: usize) -> usize {
        self.k_index[f].expect("edge spaces exist for positive edges only")
    }

    /// `ξ^L_{r,r}`.
    pub fn xi_l(&self, r: usize) -> CVec {
        let sp = self.l[r].root(r);
        let mut out = CVec::zeros(self.l_dim(r));
        out.rows_mut(self.l_layout[r].offsets[r], sp.dim()).copy_from(&vacuum(self.engine, sp));
        out
    }

    pub fn omega(&self, r: usize) -> CVec {
        linalg::unit_vector(self.k_dim(r), 0)
    }

    /// `ξ^K_{r,f}` for a positive edge `f` with `s(f) = r`.
    pub fn xi_k(&self, r: usize, f: usize) -> CVec {
        self.eta_k(r, f, &[], &[self.graph().vertex_algebra(r).unit().clone()])
    }

    /// `η_{r,q}(â₀ ⊗ … ⊗ a_n)` inside `L_r`; zero beyond the depth.
    pub fn eta_l(&self, r: usize, path: &[usize], legs: &[CVec]) -> CVec {
        let g = self.graph();
        let q = path.last().map_or(r, |&e| g.graph.range(e));
        let sp = self.l[q].root(r);
        let mut out = CVec::zeros(self.l_dim(r));
        if path.len() <= self.depth {
            let v = self.engine.tensor_coords(r, path, Functional::Counit, legs);
            out.rows_mut(self.l_layout[r].offsets[q], sp.dim()).copy_from(&sp.embed(path, &v));
        }
        out
    }

    /// `η_{r,f}(â₀ ⊗ … ⊗ a_n)` inside `K̃_r` for a positive edge `f`.
    pub fn eta_k(&self, r: usize, f: usize, path: &[usize], legs: &[CVec]) -> CVec {
        let i = self.k_slot(f);
        let sp = self.k[i].root(r);
        let mut out = CVec::zeros(self.k_dim(r));
        if path.len() <= self.depth {
            let v = self.engine.tensor_coords(r, path, Functional::CounitExpectation(f), legs);
            out.rows_mut(self.k_layout[r].offsets[i], sp.dim()).copy_from(&sp.embed(path, &v));
        }
        out
    }

    /// `π_r(a)` on `L_r` for `a ∈ A_r`.
    pub fn pi_vertex(&self, r: usize, a: &CVec) -> Result<CMat, BassSerreError> {
        let slot = &self.cache.pi[r];
        if slot.get().is_none() {
            let alg = self.graph().vertex_algebra(r);
            let basis = (0..alg.dim()).map(|i| self.pi_vertex_direct(r, &alg.basis_vector(i))).collect::<Result<Vec<_>, _>>()?;
            let _ = slot.set(basis);
        }
        Ok(combine(slot.get().expect("initialized"), a))
    }

    fn pi_vertex_direct(&self, r: usize, a: &CVec) -> Result<CMat, BassSerreError> {
        let word = Word::vertex(r, a.clone());
        let mut out = CMat::zeros(self.l_dim(r), self.l_dim(r));
        for (q, set) in self.l.iter().enumerate() {
            let sp = set.root(r);
            let off = self.l_layout[r].offsets[q];
            place(&mut out, off, off, &act_word(self.engine, &word, sp, sp)?.0);
        }
        Ok(out)
    }

    /// `ρ̃_r(a) = ε_r(a) ⊕ ρ_r(a)` on `K̃_r`.
    pub fn rho_vertex(&self, r: usize, a: &CVec) -> Result<CMat, BassSerreError> {
        let slot = &self.cache.rho[r];
        if slot.get().is_none() {
            let alg = self.graph().vertex_algebra(r);
            let basis = (0..alg.dim()).map(|i| self.rho_vertex_direct(r, &alg.basis_vector(i))).collect::<Result<Vec<_>, _>>()?;
            let _ = slot.set(basis);
        }
        Ok(combine(slot.get().expect("initialized"), a))
    }

    fn rho_vertex_direct(&self, r: usize, a: &CVec) -> Result<CMat, BassSerreError> {
        let word = Word::vertex(r, a.clone());
        let mut out = CMat::zeros(self.k_dim(r), self.k_dim(r));
        out[(0, 0)] = self.engine.functional_row(r, Functional::Counit).map_err(FundamentalError::from)?.dot(a);
        for (i, set) in self.k.iter().enumerate() {
            let sp = set.root(r);
            let off = self.k_layout[r].offsets[i];
            place(&mut out, off, off, &act_word(self.engine, &word, sp, sp)?.0);
        }
        Ok(out)
    }

    /// `u_e^L : L_{r(e)} → L_{s(e)}`.
    pub fn u_l(&self, e: usize) -> Result<CMat, BassSerreError> {
        cached(&self.cache.u_l[e], || self.u_l_direct(e))
    }

    fn u_l_direct(&self, e: usize) -> Result<CMat, BassSerreError> {
        let gr = &self.graph().graph;
        let (s, r) = (gr.source(e), gr.range(e));
        let mut out = CMat::zeros(self.l_dim(s), self.l_dim(r));
        for (q, set) in self.l.iter().enumerate() {
            let m = edge_unitary(self.engine, e, set.root(r), set.root(s))?.0;
            place(&mut out, self.l_layout[s].offsets[q], self.l_layout[r].offsets[q], &m);
        }
        Ok(out)
    }

    /// `u_e^K : K̃_{r(e)} → K̃_{s(e)}`, fixing `Ω`.
    pub fn u_k(&self, e: usize) -> Result<CMat, BassSerreError> {
        cached(&self.cache.u_k[e], || self.u_k_direct(e))
    }

    fn u_k_direct(&self, e: usize) -> Result<CMat, BassSerreError> {
        let gr = &self.graph().graph;
        let (s, r) = (gr.source(e), gr.range(e));
        let mut out = CMat::zeros(self.k_dim(s), self.k_dim(r));
        out[(0, 0)] = ONE;
        for (i, set) in self.k.iter().enumerate() {
            let m = edge_unitary(self.engine, e, set.root(r), set.root(s))?.0;
            place(&mut out, self.k_layout[s].offsets[i], self.k_layout[r].offsets[i], &m);
        }
        Ok(out)
    }

    /// The Julg-Valette operator on `L_{p₀}`.
    ///
    /// A block whose last edge is positive loses its last leg (through `ε`); one
    /// whose last edge is negative gains a unit leg across the reversed edge.
    pub fn julg_valette(&self) -> Result<JulgValette, BassSerreError> {
        let g = self.graph();
        let p0 = self.base();
        let mut f = CMat::zeros(self.k_dim(p0), self.l_dim(p0));
        for (q, set) in self.l.iter().enumerate() {
            let sp = set.root(p0);
            let eps = self.engine.functional_row(q, Functional::Counit).map_err(FundamentalError::from)?;
            let eps = CMat::from_row_slice(1, eps.len(), eps.as_slice());
            for blk in &sp.blocks {
                let w = &blk.path;
                let n = w.len();
                if n == 0 {
                    continue;
                }
                let fin = &blk.stage;
                let drop_last = kron(&CMat::identity(fin.prev_dim, fin.prev_dim), &eps) * &fin.coef;
                let prev = self.engine.stage(p0, w, n - 1, Functional::Counit);
                let last = w[n - 1];
                let (slot, tpath, m) = if g.graph.is_positive(last) {
                    let fe = Functional::CounitExpectation(last);
                    let tgt = self.engine.block(p0, &w[..n - 1], fe);
                    let id = CMat::identity(prev.prev_dim, prev.prev_dim);
                    (self.k_slot(last), &w[..n - 1], self.engine.step(&id, &prev, &tgt))
                } else {
                    let fb = g.graph.bar(last);
                    let tgt = self.engine.block(p0, w, Functional::CounitExpectation(fb));
                    let unit = g.vertex_algebra(q).unit();
                    let unit = CMat::from_column_slice(unit.len(), 1, unit.as_slice());
                    (self.k_slot(fb), w.as_slice(), &tgt.restrict * kron(&CMat::identity(prev.dim(), prev.dim()), &unit))
                };
                let Some(tb) = self.k[slot].root(p0).block(tpath) else { continue };
                let row = self.k_layout[p0].offsets[slot] + tb.offset;
                let col = self.l_layout[p0].offsets[q] + blk.offset;
                place(&mut f, row, col, &(m * drop_last));
            }
        }
        let f_tilde = &f + self.omega(p0) * self.xi_l(p0).adjoint();
        Ok(JulgValette { f, f_tilde })
    }

    /// Fredholm identities of `F` and unitarity of `F̃` on the interior window.
    pub fn fredholm_checks(&self, jv: &JulgValette) -> Vec<Check> {
        let p0 = self.base();
        let inner = self.depth.saturating_sub(1);
        let k_int: Vec<usize> = self.k_interior(p0, inner).into_iter().filter(|&i| i > 0).collect();
        let kt_int = self.k_interior(p0, inner);
        let nl = self.l_dim(p0);
        let xi = self.xi_l(p0);
        let ff = &jv.f * jv.f.adjoint();
        let ff_res = linalg::spectral_norm(&(linalg::submatrix(&ff, &k_int, &k_int) - CMat::identity(k_int.len(), k_int.len())));
        let fsf = jv.f.adjoint() * &jv.f - (CMat::identity(nl, nl) - &xi * xi.adjoint());
        let ft = &jv.f_tilde * jv.f_tilde.adjoint();
        let ft_res = linalg::spectral_norm(&(linalg::submatrix(&ft, &kt_int, &kt_int) - CMat::identity(kt_int.len(), kt_int.len())));
        let fts = jv.f_tilde.adjoint() * &jv.f_tilde - CMat::identity(nl, nl);
        let rank = linalg::numerical_rank(&jv.f, 1e-8);
        vec![
            Check::at_most("F(xi) = 0", (&jv.f * &xi).norm(), 1e-9),
            Check::at_most("F F* = Id_K on interior", ff_res, 1e-9)
                .with_detail(format!("rank(F) = {rank}, dim L = {nl}, interior dim K = {}", k_int.len())),
            Check::at_most("F* F = Id_L - p_xi", linalg::spectral_norm(&fsf), 1e-9),
            Check::at_most("augmented F is a co-isometry on interior", ft_res, 1e-9),
            Check::at_most("augmented F is an isometry", linalg::spectral_norm(&fts), 1e-9),
        ]
    }

    /// Norm relations between `L` and `K` and the two collapse laws, on random tensors.
    pub fn norm_checks(&self, seed: u64, samples: usize) -> Vec<Check> {
        let g = self.graph();
        let gr = &g.graph;
        let p0 = self.base();
        let mut s = WordSampler::new(g, seed);
        let (mut iso, mut last_l, mut last_k) = (0.0_f64, 0.0_f64, 0.0_f64);
        for _ in 0..samples {
            let len = s.rng().gen_range(0..=self.depth);
            let path = s.walk(p0, len, false);
            let n = path.len();
            let verts: Vec<usize> = std::iter::once(p0).chain(path.iter().map(|&e| gr.range(e))).collect();
            let legs: Vec<CVec> = (0..=n)
                .map(|i| {
                    let a = s.element(verts[i]);
                    if i >= 1 && i < n && path[i] == gr.bar(path[i - 1]) {
                        g.complement(path[i]) * a
                    } else {
                        a
                    }
                })
                .collect();
            let q = verts[n];
            let eps_q = self.engine.functional_row(q, Functional::Counit).expect("counits checked");
            let ea = eps_q.dot(&legs[n]);
            let lhs = self.engine.tensor_coords(p0, &path, Functional::Counit, &legs);
            let mut unit_last = legs.clone();
            unit_last[n] = g.vertex_algebra(q).unit().clone();
            let collapsed = self.engine.tensor_coords(p0, &path, Functional::Counit, &unit_last);
            last_l = last_l.max((&lhs - collapsed * ea).norm());
            if n >= 1 {
                let e = path[n - 1];
                let l2 = lhs.norm_squared();
                let a1 = self.engine.tensor_coords(p0, &path[..n - 1], Functional::CounitExpectation(e), &legs[..n]);
                let a2 = self.engine.tensor_coords(p0, &path, Functional::CounitExpectation(gr.bar(e)), &unit_last);
                let scale = l2.max(1.0);
                iso = iso
                    .max((l2 - ea.norm_sqr() * a1.norm_squared()).abs() / scale)
                    .max((l2 - ea.norm_sqr() * a2.norm_squared()).abs() / scale);
            }
            for f in gr.out_edges(q) {
                let emb = g.embed(f);
                let eps_f = self.engine.functional_row(q, Functional::Counit).expect("counits checked");
                let base = self.engine.tensor_coords(p0, &path, Functional::CounitExpectation(f), &legs);
                for b in 0..emb.ncols() {
                    let sb: CVec = emb.column(b).into_owned();
                    let mut moved = legs.clone();
                    moved[n] = g.vertex_algebra(q).mul(&legs[n], &sb);
                    let v = self.engine.tensor_coords(p0, &path, Functional::CounitExpectation(f), &moved);
                    last_k = last_k.max((v - &base * eps_f.dot(&sb)).norm());
                }
            }
        }
        vec![
            Check::at_most("L and K norms agree through the counit", iso, 1e-9),
            Check::at_most("last leg of L collapses to its counit", last_l, 1e-10),
            Check::at_most("edge-algebra legs of K collapse to their counit", last_k, 1e-10),
        ]
    }

    /// Matrix of a raw word through vertex and edge letters.
    fn product(
        &self,
        word: &Word,
        vertex: impl Fn(usize, &CVec) -> Result<CMat, BassSerreError>,
        edge: impl Fn(usize) -> Result<CMat, BassSerreError>,
    ) -> Result<CMat, BassSerreError> {
        let verts = word.vertices(self.graph());
        let n = word.len();
        let mut m = vertex(verts[n], &word.legs[n])?;
        for i in (1..=n).rev() {
            m = linalg::mul(&vertex(verts[i - 1], &word.legs[i - 1])?, &linalg::mul(&edge(word.path[i - 1])?, &m));
        }
        Ok(m)
    }

    /// `π(x)` on `L_{start}` built from the undeformed edge unitaries.
    pub fn pi(&self, word: &Word) -> Result<CMat, BassSerreError> {
        self.product(word, |v, a| self.pi_vertex(v, a), |e| self.u_l(e))
    }

    /// `ρ̃(x)` on `K̃_{start}` built from the undeformed edge unitaries.
    pub fn rho(&self, word: &Word) -> Result<CMat, BassSerreError> {
        self.product(word, |v, a| self.rho_vertex(v, a), |e| self.u_k(e))
    }

    pub fn pi_t(&self, def: &Deformation, word: &Word, t: f64) -> Result<CMat, BassSerreError> {
        self.product(word, |v, a| self.pi_vertex(v, a), |e| Ok(def.w_t(e, t)))
    }

    pub fn rho_t(&self, def: &Deformation, word: &Word, t: f64) -> Result<CMat, BassSerreError> {
        self.product(word, |v, a| self.rho_vertex(v, a), |e| Ok(def.v_t(e, t)))
    }

    /// Sum of `π_t` over the reduced words of `x`.
    pub fn pi_t_sum(&self, fun: &Fundamental, def: &Deformation, x: &ReducedWordSum, t: f64) -> Result<CMat, BassSerreError> {
        let n = self.l_dim(self.base());
        fun.words(x).iter().try_fold(CMat::zeros(n, n), |acc, w| Ok(acc + self.pi_t(def, w, t)?))
    }

    fn interior_depth(&self, length: usize) -> Result<usize, BassSerreError> {
        (length < self.depth).then(|| self.depth - length - 1).ok_or(BassSerreError::DomainExceeded { length, depth: self.depth })
    }

    /// Commutator of `F` with a reduced loop at `p₀`, against its predicted range.
    pub fn commutator_report(&self, jv: &JulgValette, words: &[Word]) -> Result<CommutatorReport, BassSerreError> {
        let g = self.graph();
        let gr = &g.graph;
        let p0 = self.base();
        let longest = words.iter().map(Word::len).max().unwrap_or(0);
        let cols = self.l_interior(p0, self.interior_depth(longest)?);
        let mut m = CMat::zeros(self.k_dim(p0), self.l_dim(p0));
        let mut predicted: Vec<CVec> = Vec::new();
        let mut bound = 0;
        for w in words {
            m += linalg::mul(&jv.f, &self.pi(w)?) - linalg::mul(&self.rho(w)?, &jv.f);
            let n = w.len();
            bound += n + 1;
            for k in 1..=n {
                let ek = w.path[n - k];
                let keep = n - k;
                if gr.is_positive(ek) {
                    predicted.push(self.eta_k(p0, ek, &w.path[..keep], &w.legs[..=keep]));
                } else {
                    let mut legs = w.legs[..=keep].to_vec();
                    legs.push(g.vertex_algebra(gr.range(ek)).unit().clone());
                    predicted.push(self.eta_k(p0, gr.bar(ek), &w.path[..=keep], &legs));
                }
            }
        }
        let m = linalg::columns(&m, &cols);
        let x = if predicted.is_empty() { CMat::zeros(m.nrows(), 0) } else { CMat::from_columns(&predicted) };
        let q = linalg::column_basis(&x, 1e-10);
        let outside = &m - &q * (q.adjoint() * &m);
        Ok(CommutatorReport {
            rank: linalg::numerical_rank(&m, 1e-8),
            bound,
            predicted: q.ncols(),
            containment: linalg::spectral_norm(&outside),
            norm: linalg::spectral_norm(&m),
        })
    }

    /// Builds `v_e, h_e, w_e, k_e` for every positive edge.
    pub fn deformation(&self) -> Result<Deformation, BassSerreError> {
        let g = self.graph();
        let gr = &g.graph;
        let mut edges = vec![None; gr.edge_count()];
        for &e in &self.positive {
            let (s, r) = (gr.source(e), gr.range(e));
            let eb = gr.bar(e);
            let u_k = self.u_k(e)?;
            let u_l = self.u_l(e)?;
            let unit = |v: usize| g.vertex_algebra(v).unit().clone();
            let (sk, sl) = if gr.is_loop(e) {
                let zeta = self.eta_k(r, e, &[eb], &[unit(r), unit(s)]);
                (swap(&self.omega(r), &zeta), CMat::identity(self.l_dim(r), self.l_dim(r)))
            } else {
                let zeta = self.eta_l(r, &[eb], &[unit(r), unit(s)]);
                (CMat::identity(self.k_dim(r), self.k_dim(r)), swap(&self.xi_l(r), &zeta))
            };
            let herm = |m: CMat| (&m + m.adjoint()) * c(0.5);
            let h = herm(unitary_log(&sk)? * C64::new(0.0, -1.0));
            let k = herm(unitary_log(&sl)? * C64::new(0.0, -1.0));
            let h_spec = linalg::herm_eig(&h);
            let k_spec = linalg::herm_eig(&k);
            edges[e] = Some(EdgeDeformation { edge: e, v: &u_k * &sk, w: &u_l * &sl, u_k, h, u_l, k, h_spec, k_spec });
        }
        Ok(Deformation { edges, bars: (0..gr.edge_count()).map(|e| gr.bar(e)).collect() })
    }

    /// Invariants of the deformation family and the intertwining laws.
    pub fn deformation_checks(&self, def: &Deformation) -> Result<Vec<Check>, BassSerreError> {
        let g = self.graph();
        let gr = &g.graph;
        let mut herm = 0.0_f64;
        let mut commute = 0.0_f64;
        let mut endpoints = 0.0_f64;
        let mut rho_int = 0.0_f64;
        let mut pi_int = 0.0_f64;
        let mut unitary = 0.0_f64;
        let mut tree_fix = 0.0_f64;
        let inner = self.depth.saturating_sub(1);
        let outer = self.depth.saturating_sub(2);
        for &e in &self.positive {
            let d = def.edge(e);
            let (s, r) = (gr.source(e), gr.range(e));
            herm = herm.max(linalg::max_abs(&(&d.h - d.h.adjoint()))).max(linalg::max_abs(&(&d.k - d.k.adjoint())));
            endpoints = endpoints
                .max(linalg::max_abs(&(def.v_t(e, 0.0) - &d.u_k)))
                .max(linalg::max_abs(&(def.v_t(e, 1.0) - &d.v)))
                .max(linalg::max_abs(&(def.w_t(e, 0.0) - &d.u_l)))
                .max(linalg::max_abs(&(def.w_t(e, 1.0) - &d.w)));
            let kr = self.k_interior(r, inner);
            let lr = self.l_interior(r, inner);
            unitary = unitary
                .max(linalg::spectral_norm(
                    &(linalg::columns(&linalg::mul(&d.v.adjoint(), &d.v), &kr)
                        - linalg::columns(&CMat::identity(self.k_dim(r), self.k_dim(r)), &kr)),
                ))
                .max(linalg::spectral_norm(
                    &(linalg::columns(&linalg::mul(&d.w.adjoint(), &d.w), &lr)
                        - linalg::columns(&CMat::identity(self.l_dim(r), self.l_dim(r)), &lr)),
                ));
            if g.tree.contains(e) && !gr.is_loop(e) {
                for t in [0.25, 0.5, 1.0] {
                    tree_fix = tree_fix.max((def.v_t(e, t) * self.omega(r) - self.omega(s)).norm());
                }
            }
            let ks = self.k_interior(s, outer);
            let ls = self.l_interior(s, outer);
            for b in 0..g.embed(e).ncols() {
                let sb: CVec = g.embed(e).column(b).into_owned();
                let rb: CVec = g.embed(gr.bar(e)).column(b).into_owned();
                let rho_r = self.rho_vertex(r, &rb)?;
                let pi_r = self.pi_vertex(r, &rb)?;
                let lhs = self.rho_vertex(s, &sb)?;
                let rhs = linalg::mul(&linalg::mul(&d.v, &rho_r), &d.v.adjoint());
                rho_int = rho_int.max(linalg::spectral_norm(&linalg::columns(&(lhs - rhs), &ks)));
                let lhs = self.pi_vertex(s, &sb)?;
                let rhs = linalg::mul(&linalg::mul(&d.w, &pi_r), &d.w.adjoint());
                pi_int = pi_int.max(linalg::spectral_norm(&linalg::columns(&(lhs - rhs), &ls)));
                let hc = linalg::mul(&d.h, &rho_r) - linalg::mul(&rho_r, &d.h);
                let kc = linalg::mul(&d.k, &pi_r) - linalg::mul(&pi_r, &d.k);
                commute = commute
                    .max(linalg::spectral_norm(&linalg::columns(&hc, &self.k_interior(r, outer))))
                    .max(linalg::spectral_norm(&linalg::columns(&kc, &self.l_interior(r, outer))));
            }
        }
        Ok(vec![
            Check::at_most("deformation generators are Hermitian", herm, 1e-9),
            Check::at_most("deformation generators commute with the edge algebra", commute, 1e-9),
            Check::at_most("deformation endpoints", endpoints, 1e-9),
            Check::at_most("deformed edge unitaries are isometric on interior", unitary, 1e-9),
            Check::at_most("tree edges fix the augmenting vector", tree_fix, 1e-9),
            Check::at_most("edge-space intertwining", rho_int, 1e-9),
            Check::at_most("vertex-space intertwining", pi_int, 1e-9),
        ])
    }

    /// Tree-conjugated vertex basis elements and edge unitaries, as loops at `p₀`.
    pub fn generators(&self) -> Vec<(String, Word)> {
        let g = self.graph();
        let gr = &g.graph;
        let p0 = self.base();
        let unit = |v: usize| g.vertex_algebra(v).unit().clone();
        let loop_word = |path: Vec<usize>, special: Option<(usize, CVec)>| {
            let verts: Vec<usize> = std::iter::once(p0).chain(path.iter().map(|&e| gr.range(e))).collect();
            let mut legs: Vec<CVec> = verts.iter().map(|&v| unit(v)).collect();
            if let Some((i, a)) = special {
                legs[i] = a;
            }
            Word { start: p0, path, legs }
        };
        let mut out = Vec::new();
        for q in 0..gr.vertex_count() {
            let down = g.geodesic(p0, q);
            let mut path = down.clone();
            path.extend(g.geodesic(q, p0));
            for (i, name) in g.vertices[q].names.iter().enumerate() {
                let b = g.vertex_algebra(q).basis_vector(i);
                out.push((format!("{name}@{}", gr.vertex_label(q)), loop_word(path.clone(), Some((down.len(), b)))));
            }
        }
        for &e in &self.positive {
            let mut path = g.geodesic(p0, gr.source(e));
            path.push(e);
            path.extend(g.geodesic(gr.range(e), p0));
            out.push((format!("u@{}", gr.edge(e).label), loop_word(path, None)));
        }
        out
    }

    fn sandwich(&self, jv: &JulgValette, m: &CMat) -> CMat {
        linalg::mul(&linalg::mul(&jv.f_tilde, m), &jv.f_tilde.adjoint())
    }

    /// `‖F̃π_t(x)F̃* − ρ̃_t(x)‖` on the interior columns of `K̃_{p₀}`.
    pub fn degeneracy_residual(&self, jv: &JulgValette, def: &Deformation, word: &Word, t: f64) -> Result<f64, BassSerreError> {
        let cols = self.k_interior(self.base(), self.interior_depth(word.len())?);
        let diff = self.sandwich(jv, &self.pi_t(def, word, t)?) - self.rho_t(def, word, t)?;
        Ok(linalg::spectral_norm(&linalg::columns(&diff, &cols)))
    }

    /// Largest generator departure from degeneracy at parameter `t`.
    pub fn generator_departure(&self, jv: &JulgValette, def: &Deformation, t: f64) -> Result<f64, BassSerreError> {
        self.generators()
            .iter()
            .filter(|(_, w)| w.len() < self.depth)
            .map(|(_, w)| self.degeneracy_residual(jv, def, w, t))
            .try_fold(0.0_f64, |acc, r| Ok(acc.max(r?)))
    }

    /// Degeneracy of `(F̃, π₁, ρ̃₁)` on generators, on `Ω` and `ξ^K`, and on random words.
    pub fn degeneracy_certificate(
        &self,
        jv: &JulgValette,
        def: &Deformation,
        seed: u64,
        random_words: usize,
    ) -> Result<Vec<Check>, BassSerreError> {
        let g = self.graph();
        let p0 = self.base();
        let gens: Vec<(String, Word)> = self.generators().into_iter().filter(|(_, w)| w.len() < self.depth).collect();
        let mut worst = (0.0_f64, String::new());
        let mut claim = 0.0_f64;
        let mut probes = vec![self.omega(p0)];
        for &f in &self.positive {
            if g.graph.source(f) == p0 {
                probes.push(self.xi_k(p0, f));
            }
        }
        for (name, w) in &gens {
            let r = self.degeneracy_residual(jv, def, w, 1.0)?;
            if r >= worst.0 {
                worst = (r, name.clone());
            }
            let diff = self.sandwich(jv, &self.pi_t(def, w, 1.0)?) - self.rho_t(def, w, 1.0)?;
            for p in &probes {
                claim = claim.max((&diff * p).norm());
            }
        }
        let departure = self.generator_departure(jv, def, 0.0)?;
        let mut s = WordSampler::new(g, seed);
        let mut random = 0.0_f64;
        let mut tried = 0;
        let mut used = 0;
        while used < random_words && tried < 50 * random_words.max(1) {
            tried += 1;
            let len = s.length(self.depth.saturating_sub(1));
            let w = s.reduced_loop(p0, len);
            if w.len() >= self.depth {
                continue;
            }
            used += 1;
            random = random.max(self.degeneracy_residual(jv, def, &w, 1.0)?);
        }
        Ok(vec![
            Check::at_most("degenerate at t=1 on generators", worst.0, 1e-8).with_detail(format!(
                "{} generators, worst {}, departure at t=0 is {departure:.3e}",
                gens.len(),
                worst.1
            )),
            Check::at_most("degenerate at t=1 on Omega and edge vacua", claim, 1e-8),
            Check::at_most("degenerate at t=1 on random words", random, 1e-8).with_detail(format!("{used} words")),
        ])
    }

    /// Largest `‖π_t(x) − π_s(x)‖/|t − s|` and `‖ρ̃_t(x) − ρ̃_s(x)‖/|t − s|` over a
    /// uniform grid, with the spectral bound for the word.
    pub fn homotopy_continuity(&self, def: &Deformation, word: &Word, grid: usize) -> Result<(f64, f64), BassSerreError> {
        let g = self.graph();
        let n = word.len();
        let depth = self.interior_depth(n)?;
        let end = word.end(g);
        let lc = self.l_interior(end, depth);
        let kc = self.k_interior(end, depth);
        let grid = grid.max(2);
        let ts: Vec<f64> = (0..grid).map(|i| i as f64 / (grid - 1) as f64).collect();
        let mats: Vec<(CMat, CMat)> = ts
            .par_iter()
            .map(|&t| Ok((linalg::columns(&self.pi_t(def, word, t)?, &lc), linalg::columns(&self.rho_t(def, word, t)?, &kc))))
            .collect::<Result<_, BassSerreError>>()?;
        let mut ratio = 0.0_f64;
        for i in 1..grid {
            let dt = ts[i] - ts[i - 1];
            ratio = ratio
                .max(linalg::spectral_norm(&(&mats[i].0 - &mats[i - 1].0)) / dt)
                .max(linalg::spectral_norm(&(&mats[i].1 - &mats[i - 1].1)) / dt);
        }
        let verts = word.vertices(g);
        let legs: f64 = word.legs.iter().zip(&verts).map(|(a, &v)| element_norm(g, v, a)).product();
        let gen = word.path.iter().map(|&e| def.max_generator_norm(e)).fold(0.0, f64::max);
        Ok((ratio, n as f64 * gen * legs))
    }

    /// `π₀` against the normal-form action, and multiplicativity of `π_t` on reduced products.
    pub fn representation_checks(&self, def: &Deformation, seed: u64, samples: usize) -> Result<Vec<Check>, BassSerreError> {
        let g = self.graph();
        let p0 = self.base();
        let fun = Fundamental::new(g);
        let mut s = WordSampler::new(g, seed);
        let mut agree = 0.0_f64;
        let mut mult = 0.0_f64;
        let mut inverse = 0.0_f64;
        let half = self.depth.saturating_sub(1) / 2;
        for i in 0..samples {
            let t = (i as f64 + 0.5) / samples.max(1) as f64;
            let lx = s.length(half);
            let x = s.reduced_loop(p0, lx);
            let ly = s.length(half);
            let y = s.reduced_loop(p0, ly);
            if x.len() + y.len() >= self.depth {
                continue;
            }
            let rx = fun.reduce(&x)?;
            let cols = self.l_interior(p0, self.depth - x.len() - 1);
            let mut total = CMat::zeros(self.l_dim(p0), self.l_dim(p0));
            for (q, set) in self.l.iter().enumerate() {
                let sp = set.root(p0);
                let off = self.l_layout[p0].offsets[q];
                place(&mut total, off, off, &act(&fun, self.engine, &rx, sp)?.0);
            }
            let d0 = self.pi_t(def, &x, 0.0)? - total;
            agree = agree.max(linalg::spectral_norm(&linalg::columns(&d0, &cols)));
            let xy = fun.multiply(&rx, &fun.reduce(&y)?)?;
            let cols = self.l_interior(p0, self.depth - x.len() - y.len() - 1);
            let lhs = linalg::mul(&self.pi_t(def, &x, t)?, &self.pi_t(def, &y, t)?);
            let rhs = self.pi_t_sum(&fun, def, &xy, t)?;
            mult = mult.max(linalg::spectral_norm(&linalg::columns(&(lhs - rhs), &cols)));
        }
        for &e in &self.positive {
            let s_e = g.graph.source(e);
            let cols = self.l_interior(s_e, self.depth.saturating_sub(2));
            for t in [0.3, 0.7] {
                let prod = def.w_t(e, t) * def.w_t(g.graph.bar(e), t);
                let id = CMat::identity(prod.nrows(), prod.ncols());
                inverse = inverse.max(linalg::spectral_norm(&linalg::columns(&(prod - id), &cols)));
            }
        }
        Ok(vec![
            Check::at_most("undeformed representation matches the normal-form action", agree, 1e-9),
            Check::at_most("deformed representation is multiplicative", mult, 1e-9),
            Check::at_most("deformed edge unitaries invert their reverses", inverse, 1e-9),
        ])
    }
}

/// All Bass-Serre checks for one graph at one depth.
pub fn verify(g: &AlgebraGraph, depth: usize, seed: u64) -> Result<SuiteReport, BassSerreError> {
    let engine = PathEngine::new(g);
    let tree = BassSerreTree::new(&engine, depth)?;
    let jv = tree.julg_valette()?;
    let def = tree.deformation()?;
    let mut checks = tree.fredholm_checks(&jv);
    checks.extend(tree.norm_checks(seed, 40));
    let mut s = WordSampler::new(g, seed ^ 0x5eed);
    let (mut excess, mut contain) = (0, 0.0_f64);
    let mut words = 0;
    for _ in 0..50 {
        let len = s.length(depth.saturating_sub(2));
        let w = s.reduced_loop(g.base(), len);
        if w.len() + 1 >= depth {
            continue;
        }
        let rep = tree.commutator_report(&jv, std::slice::from_ref(&w))?;
        excess = excess.max(rep.rank.saturating_sub(rep.bound.min(rep.predicted)));
        contain = contain.max(rep.containment);
        words += 1;
    }
    checks.push(Check::count("commutator rank excess over prediction", excess, 0).with_detail(format!("{words} words")));
    checks.push(Check::at_most("commutator range inside prediction", contain, 1e-8));
    checks.extend(tree.deformation_checks(&def)?);
    checks.extend(tree.representation_checks(&def, seed, 12)?);
    checks.extend(tree.degeneracy_certificate(&jv, &def, seed, 20)?);
    let mut worst = 0.0_f64;
    for (_, w) in tree.generators().iter().filter(|(_, w)| w.len() < depth && !w.path.is_empty()) {
        let (ratio, bound) = tree.homotopy_continuity(&def, w, 9)?;
        worst = worst.max(ratio - bound);
    }
    checks.push(Check::at_most("homotopy Lipschitz ratio within spectral bound", worst.max(0.0), 1e-9));
    Ok(SuiteReport::new("bassserre", checks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn integer_loop_window_counts() {
        let g = fixtures::integer_loop();
        let engine = PathEngine::new(&g);
        let tree = BassSerreTree::new(&engine, 3).unwrap();
        let p0 = g.base();
        assert_eq!(tree.l_dim(p0), 7);
        // edges of the tree window: the range of F, one more than the depth-2 part of K
        assert_eq!(tree.k_interior(p0, 2).len() - 1, 5);
        let jv = tree.julg_valette().unwrap();
        assert_eq!(linalg::numerical_rank(&jv.f, 1e-8), 6);
        assert!((tree.xi_l(p0).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fredholm_identities_on_shipped_fixtures() {
        for (name, g) in fixtures::shipped() {
            let engine = PathEngine::new(&g);
            let tree = BassSerreTree::new(&engine, 5).unwrap();
            let jv = tree.julg_valette().unwrap();
            for c in tree.fredholm_checks(&jv).into_iter().chain(tree.norm_checks(1, 20)) {
                assert!(c.pass, "{name}: {c:?}");
            }
        }
    }

    #[test]
    fn degenerate_at_one_but_not_at_zero() {
        let g = fixtures::integer_loop();
        let engine = PathEngine::new(&g);
        let tree = BassSerreTree::new(&engine, 5).unwrap();
        let jv = tree.julg_valette().unwrap();
        let def = tree.deformation().unwrap();
        assert!(tree.generator_departure(&jv, &def, 1.0).unwrap() <= 1e-8);
        assert!(tree.generator_departure(&jv, &def, 0.0).unwrap() > 0.5);
    }

    #[test]
    fn commutator_of_an_edge_has_small_rank() {
        let g = fixtures::integer_loop();
        let engine = PathEngine::new(&g);
        let tree = BassSerreTree::new(&engine, 5).unwrap();
        let jv = tree.julg_valette().unwrap();
        let e = g.graph.positive_edges()[0];
        let rep = tree.commutator_report(&jv, &[Word::edge(&g, e)]).unwrap();
        assert!(rep.rank <= 2 && rep.containment <= 1e-8, "{rep:?}");
        let a = Word::vertex(g.base(), g.vertex_algebra(g.base()).unit().clone());
        assert_eq!(tree.commutator_report(&jv, &[a]).unwrap().rank, 0);
    }

    #[test]
    fn principal_log_snaps_minus_one() {
        let u = CMat::from_diagonal(&CVec::from_vec(vec![c(-1.0), ONE, C64::new(0.0, 1.0)]));
        let h = unitary_log(&u).unwrap() * C64::new(0.0, -1.0);
        assert!((h[(0, 0)].re - std::f64::consts::PI).abs() < 1e-12);
        assert!((h[(2, 2)].re - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        let near = CMat::from_diagonal(&CVec::from_vec(vec![C64::from_polar(1.0, std::f64::consts::PI - 1e-7)]));
        assert!(matches!(unitary_log(&near), Err(BassSerreError::LogBranchAmbiguity { .. })));
    }

    #[test]
    fn full_suite_passes_on_shipped_fixtures() {
        for (name, g) in fixtures::shipped() {
            let report = verify(&g, 5, 0).unwrap();
            for c in &report.checks {
                assert!(c.pass, "{name}: {c:?}");
            }
        }
    }
}
