//! Normal forms in the reduced fundamental algebra and its action on path spaces.
//!
//! An element is a [`ReducedWordSum`]: a sparse combination of reduced words
//! `a₀ u_{e₁} a₁ … u_{e_n} a_n` whose legs are expanded over vertex bases. A
//! leg sitting between `e_i` and `e_{i+1} = ē_i` is stored over a basis of
//! `ker E^s_{e_{i+1}}`, which makes the expansion unique.
//!
//! The action on a [`TruncatedPathSpace`] follows the product formula for a
//! reduced operator against a path tensor: collapse as long as the word's edges
//! cancel the path's edges, emitting one complement term per cancelled edge.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::graphcore::AlgebraGraph;
use crate::linalg::{self, kron, kron_vec, CMat, CVec, C64, ONE, ZERO};
use crate::pathmod::{build_truncated_space, Block, Functional, PathEngine, PathError, TruncatedPathSpace};

/// Default cap on the length of normal forms.
pub const WORD_CAP: usize = 12;
const COEFF_EPS: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FundamentalError {
    #[error("leg {position} has dimension {found}, expected {expected}")]
    LegMismatch { position: usize, expected: usize, found: usize },
    #[error("edges do not compose at position {position}")]
    NotComposable { position: usize },
    #[error("word does not start and end at the base vertex")]
    NotALoop,
    #[error("normal form of length {length} exceeds the cap {cap}")]
    WordTooLong { length: usize, cap: usize },
    #[error("vector has mass {mass:.3e} on blocks where the action leaves the window")]
    DomainExceeded { mass: f64 },
    #[error("spaces are incompatible: {reason}")]
    SpaceMismatch { reason: String },
    #[error(transparent)]
    Path(#[from] PathError),
}

/// A raw word `a₀ u_{e₁} a₁ … u_{e_n} a_n` with dense legs.
#[derive(Debug, Clone, PartialEq)]
pub struct Word {
    pub start: usize,
    pub path: Vec<usize>,
    pub legs: Vec<CVec>,
}

impl Word {
    pub fn new(g: &AlgebraGraph, start: usize, path: Vec<usize>, legs: Vec<CVec>) -> Result<Self, FundamentalError> {
        if legs.len() != path.len() + 1 {
            return Err(FundamentalError::LegMismatch { position: legs.len(), expected: path.len() + 1, found: legs.len() });
        }
        let mut v = start;
        for (i, &e) in path.iter().enumerate() {
            if g.graph.source(e) != v {
                return Err(FundamentalError::NotComposable { position: i });
            }
            v = g.graph.range(e);
        }
        let w = Word { start, path, legs };
        for (i, v) in w.vertices(g).into_iter().enumerate() {
            if w.legs[i].len() != g.vertex_dim(v) {
                return Err(FundamentalError::LegMismatch { position: i, expected: g.vertex_dim(v), found: w.legs[i].len() });
            }
        }
        Ok(w)
    }

    pub fn vertex(start: usize, a: CVec) -> Self {
        Word { start, path: Vec::new(), legs: vec![a] }
    }

    /// The bare edge unitary `u_e`.
    pub fn edge(g: &AlgebraGraph, e: usize) -> Self {
        let s = g.graph.source(e);
        let r = g.graph.range(e);
        Word { start: s, path: vec![e], legs: vec![g.vertex_algebra(s).unit().clone(), g.vertex_algebra(r).unit().clone()] }
    }

    pub fn len(&self) -> usize {
        self.path.len()
    }

    pub fn is_empty(&self) -> bool {
        self.path.is_empty()
    }

    pub fn end(&self, g: &AlgebraGraph) -> usize {
        self.path.last().map_or(self.start, |&e| g.graph.range(e))
    }

    /// Vertex of each leg.
    pub fn vertices(&self, g: &AlgebraGraph) -> Vec<usize> {
        std::iter::once(self.start).chain(self.path.iter().map(|&e| g.graph.range(e))).collect()
    }

    /// Concatenation through the middle product.
    pub fn concat(&self, g: &AlgebraGraph, other: &Word) -> Word {
        let mid = self.end(g);
        let alg = g.vertex_algebra(mid);
        let mut legs = self.legs[..self.legs.len() - 1].to_vec();
        legs.push(alg.mul(self.legs.last().expect("legs"), &other.legs[0]));
        legs.extend(other.legs[1..].iter().cloned());
        let mut path = self.path.clone();
        path.extend(other.path.iter().cloned());
        Word { start: self.start, path, legs }
    }

    pub fn adjoint(&self, g: &AlgebraGraph) -> Word {
        let verts = self.vertices(g);
        Word {
            start: self.end(g),
            path: self.path.iter().rev().map(|&e| g.graph.bar(e)).collect(),
            legs: self.legs.iter().zip(verts).rev().map(|(a, v)| g.vertex_algebra(v).star(a)).collect(),
        }
    }

    pub fn scaled(mut self, z: C64) -> Word {
        self.legs[0] *= z;
        self
    }

    /// Whether every backtracking leg is killed by the edge expectation.
    pub fn is_reduced(&self, g: &AlgebraGraph, tol: f64) -> bool {
        (1..self.path.len()).all(|i| {
            let f = self.path[i];
            f != g.graph.bar(self.path[i - 1]) || (g.expectation(f) * &self.legs[i]).norm() <= tol
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct TermKey {
    path: Vec<usize>,
    mono: Vec<usize>,
}

/// Element of the fundamental algebra in normal form, based at `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedWordSum {
    base: usize,
    terms: BTreeMap<TermKey, C64>,
}

impl ReducedWordSum {
    pub fn zero(base: usize) -> Self {
        ReducedWordSum { base, terms: BTreeMap::new() }
    }

    pub fn base(&self) -> usize {
        self.base
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Longest word in the normal form.
    pub fn max_len(&self) -> usize {
        self.terms.keys().map(|k| k.path.len()).max().unwrap_or(0)
    }

    /// Distinct paths carrying nonzero terms.
    pub fn paths(&self) -> Vec<Vec<usize>> {
        let mut v: Vec<Vec<usize>> = self.terms.keys().map(|k| k.path.clone()).collect();
        v.dedup();
        v
    }

    pub fn scale(&self, z: C64) -> Self {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c *= z;
        }
        out.prune();
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (k, c) in &other.terms {
            *out.terms.entry(k.clone()).or_insert(ZERO) += c;
        }
        out.prune();
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-ONE))
    }

    fn prune(&mut self) {
        self.terms.retain(|_, c| c.norm() > COEFF_EPS);
    }
}

/// Normal-form arithmetic for one graph of algebras.
pub struct Fundamental<'g> {
    g: &'g AlgebraGraph,
    /// Per edge: selected columns of `id − E` and the solver onto them.
    kernel: Vec<(CMat, CMat)>,
    cap: usize,
}

impl<'g> Fundamental<'g> {
    pub fn new(g: &'g AlgebraGraph) -> Self {
        let kernel = (0..g.graph.edge_count())
            .map(|f| {
                let p = g.complement(f);
                let mut cols: Vec<usize> = Vec::new();
                for j in 0..p.ncols() {
                    let mut trial = cols.clone();
                    trial.push(j);
                    let m = linalg::columns(p, &trial);
                    if linalg::numerical_rank(&m, 1e-10) == trial.len() {
                        cols = trial;
                    }
                }
                let basis = linalg::columns(p, &cols);
                let solver = linalg::pinv(&basis);
                (basis, solver)
            })
            .collect();
        Fundamental { g, kernel, cap: WORD_CAP }
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap;
        self
    }

    pub fn graph(&self) -> &'g AlgebraGraph {
        self.g
    }

    pub fn base(&self) -> usize {
        self.g.base()
    }

    pub fn one(&self) -> ReducedWordSum {
        self.vertex(self.g.vertex_algebra(self.base()).unit().clone())
    }

    pub fn scalar(&self, z: C64) -> ReducedWordSum {
        self.one().scale(z)
    }

    /// An element of `A_{p₀}`.
    pub fn vertex(&self, a: CVec) -> ReducedWordSum {
        let mut out = ReducedWordSum::zero(self.base());
        self.expand(&[], &[a], ONE, &mut out);
        out
    }

    fn projected_edge(&self, path: &[usize], i: usize) -> Option<usize> {
        (i >= 1 && i < path.len() && path[i] == self.g.graph.bar(path[i - 1])).then(|| path[i])
    }

    fn expand(&self, path: &[usize], legs: &[CVec], coef: C64, out: &mut ReducedWordSum) {
        let mut partial: Vec<(Vec<usize>, C64)> = vec![(Vec::new(), coef)];
        for (i, leg) in legs.iter().enumerate() {
            let coords = match self.projected_edge(path, i) {
                Some(f) => &self.kernel[f].1 * leg,
                None => leg.clone(),
            };
            let scale = coords.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let mut next = Vec::new();
            for (mono, c) in &partial {
                for (j, z) in coords.iter().enumerate() {
                    if z.norm() > 1e-15 * scale.max(1.0) {
                        let mut m = mono.clone();
                        m.push(j);
                        next.push((m, c * z));
                    }
                }
            }
            partial = next;
        }
        for (mono, c) in partial {
            *out.terms.entry(TermKey { path: path.to_vec(), mono }).or_insert(ZERO) += c;
        }
    }

    fn dense(&self, key: &TermKey, coef: C64) -> Word {
        let g = self.g;
        let start = if key.path.is_empty() { self.base() } else { g.graph.source(key.path[0]) };
        let verts: Vec<usize> = std::iter::once(start).chain(key.path.iter().map(|&e| g.graph.range(e))).collect();
        let legs = key
            .mono
            .iter()
            .enumerate()
            .map(|(i, &j)| match self.projected_edge(&key.path, i) {
                Some(f) => self.kernel[f].0.column(j).into_owned(),
                None => linalg::unit_vector(g.vertex_dim(verts[i]), j),
            })
            .collect();
        Word { start, path: key.path.clone(), legs }.scaled(coef)
    }

    /// Reduced words of the normal form with their coefficients folded into leg 0.
    pub fn words(&self, x: &ReducedWordSum) -> Vec<Word> {
        x.terms.iter().map(|(k, &c)| self.dense(k, c)).collect()
    }

    /// Normal form of a raw word based at `p₀`.
    pub fn reduce(&self, word: &Word) -> Result<ReducedWordSum, FundamentalError> {
        let w = Word::new(self.g, word.start, word.path.clone(), word.legs.clone())?;
        if w.start != self.base() || w.end(self.g) != self.base() {
            return Err(FundamentalError::NotALoop);
        }
        if w.len() > 2 * self.cap {
            return Err(FundamentalError::WordTooLong { length: w.len(), cap: self.cap });
        }
        let mut out = ReducedWordSum::zero(self.base());
        self.reduce_into(w.path, w.legs, &mut out)?;
        out.prune();
        Ok(out)
    }

    fn reduce_into(&self, path: Vec<usize>, legs: Vec<CVec>, out: &mut ReducedWordSum) -> Result<(), FundamentalError> {
        let g = self.g;
        let mut stack = vec![(path, legs)];
        while let Some((path, legs)) = stack.pop() {
            if legs.iter().any(|l| l.norm() <= COEFF_EPS) {
                continue;
            }
            let hit = (1..path.len()).find_map(|i| {
                let f = path[i];
                if f != g.graph.bar(path[i - 1]) {
                    return None;
                }
                let e = g.expectation(f) * &legs[i];
                (e.norm() > 1e-13 * (1.0 + legs[i].norm())).then_some((i, e))
            });
            match hit {
                None => {
                    if path.len() > self.cap {
                        return Err(FundamentalError::WordTooLong { length: path.len(), cap: self.cap });
                    }
                    self.expand(&path, &legs, ONE, out);
                }
                Some((i, e_part)) => {
                    let p_part = &legs[i] - &e_part;
                    if p_part.norm() > 1e-13 * (1.0 + legs[i].norm()) {
                        let mut l2 = legs.clone();
                        l2[i] = p_part;
                        stack.push((path.clone(), l2));
                    }
                    let v = g.graph.source(path[i - 1]);
                    let alg = g.vertex_algebra(v);
                    let carried = g.transfer(path[i]) * e_part;
                    let merged = alg.mul(&alg.mul(&legs[i - 1], &carried), &legs[i + 1]);
                    let mut p2 = path[..i - 1].to_vec();
                    p2.extend_from_slice(&path[i + 1..]);
                    let mut l2 = legs[..i - 1].to_vec();
                    l2.push(merged);
                    l2.extend(legs[i + 2..].iter().cloned());
                    stack.push((p2, l2));
                }
            }
        }
        Ok(())
    }

    /// Normal form of a sum of raw words.
    pub fn reduce_sum(&self, words: &[Word]) -> Result<ReducedWordSum, FundamentalError> {
        let mut out = ReducedWordSum::zero(self.base());
        for w in words {
            out = out.add(&self.reduce(w)?);
        }
        Ok(out)
    }

    pub fn multiply(&self, x: &ReducedWordSum, y: &ReducedWordSum) -> Result<ReducedWordSum, FundamentalError> {
        let mut out = ReducedWordSum::zero(self.base());
        let ys = self.words(y);
        for wx in self.words(x) {
            for wy in &ys {
                let w = wx.concat(self.g, wy);
                if w.len() > 2 * self.cap {
                    return Err(FundamentalError::WordTooLong { length: w.len(), cap: self.cap });
                }
                self.reduce_into(w.path, w.legs, &mut out)?;
            }
        }
        out.prune();
        Ok(out)
    }

    pub fn power(&self, x: &ReducedWordSum, n: usize) -> Result<ReducedWordSum, FundamentalError> {
        let mut acc = self.one();
        for _ in 0..n {
            acc = self.multiply(&acc, x)?;
        }
        Ok(acc)
    }

    pub fn adjoint(&self, x: &ReducedWordSum) -> ReducedWordSum {
        let mut out = ReducedWordSum::zero(self.base());
        for w in self.words(x) {
            let a = w.adjoint(self.g);
            self.expand(&a.path, &a.legs, ONE, &mut out);
        }
        out.prune();
        out
    }

    /// Component in `A_{p₀}`, i.e. the conditional expectation onto the base vertex algebra.
    pub fn expectation_onto_vertex(&self, x: &ReducedWordSum) -> CVec {
        let d = self.g.vertex_dim(self.base());
        let mut v = CVec::zeros(d);
        for (k, c) in &x.terms {
            if k.path.is_empty() {
                v[k.mono[0]] += c;
            }
        }
        v
    }

    /// The fundamental state: `φ_{p₀}` on the vertex part, zero on reduced words.
    pub fn fundamental_state(&self, x: &ReducedWordSum) -> C64 {
        self.g.vertices[self.base()].state.eval(&self.expectation_onto_vertex(x))
    }

    /// `φ((x−y)*(x−y))^{1/2}`, a faithful distance.
    pub fn distance(&self, x: &ReducedWordSum, y: &ReducedWordSum) -> Result<f64, FundamentalError> {
        let d = x.sub(y);
        let n = self.fundamental_state(&self.multiply(&self.adjoint(&d), &d)?);
        Ok(n.re.max(0.0).sqrt())
    }

    /// `φ(xⁿ)` for `n = 1..=max_degree`.
    pub fn moments(&self, x: &ReducedWordSum, max_degree: usize) -> Result<Vec<C64>, FundamentalError> {
        let mut acc = self.one();
        let mut out = Vec::with_capacity(max_degree);
        for _ in 0..max_degree {
            acc = self.multiply(&acc, x)?;
            out.push(self.fundamental_state(&acc));
        }
        Ok(out)
    }
}

/// Truncated spaces for every root, sharing base vertex, depth and functional.
pub struct SpaceSet<'e, 'g> {
    pub engine: &'e PathEngine<'g>,
    pub base: usize,
    pub depth: usize,
    pub functional: Functional,
    pub spaces: Vec<TruncatedPathSpace>,
}

impl<'e, 'g> SpaceSet<'e, 'g> {
    pub fn new(engine: &'e PathEngine<'g>, base: usize, depth: usize, functional: Functional) -> Result<Self, FundamentalError> {
        let n = engine.graph().graph.vertex_count();
        let spaces = (0..n).map(|r| build_truncated_space(engine, r, base, depth, functional)).collect::<Result<Vec<_>, _>>()?;
        Ok(SpaceSet { engine, base, depth, functional, spaces })
    }

    pub fn root(&self, r: usize) -> &TruncatedPathSpace {
        &self.spaces[r]
    }
}

fn check_pair(src: &TruncatedPathSpace, dst: &TruncatedPathSpace) -> Result<(), FundamentalError> {
    if src.base != dst.base || src.depth != dst.depth || src.functional != dst.functional {
        return Err(FundamentalError::SpaceMismatch { reason: "base, depth or functional differ".into() });
    }
    Ok(())
}

/// Matrix of a reduced word from `dst.root` to `src.root`, acting `src → dst`,
/// with the columns on which it stays inside the window.
///
/// The matrix is the compression to the window: components landing beyond the
/// depth are dropped, so adjoints of compressions are compressions of adjoints.
pub fn act_word(
    engine: &PathEngine,
    word: &Word,
    src: &TruncatedPathSpace,
    dst: &TruncatedPathSpace,
) -> Result<(CMat, Vec<bool>), FundamentalError> {
    act_word_on(engine, word, src, dst, &|_| true)
}

/// `act_word` restricted to the source blocks selected by `keep`; other columns stay zero.
fn act_word_on(
    engine: &PathEngine,
    word: &Word,
    src: &TruncatedPathSpace,
    dst: &TruncatedPathSpace,
    keep: &dyn Fn(&Block) -> bool,
) -> Result<(CMat, Vec<bool>), FundamentalError> {
    check_pair(src, dst)?;
    let g = engine.graph();
    if word.start != dst.root || word.end(g) != src.root {
        return Err(FundamentalError::SpaceMismatch { reason: "word endpoints do not match the space roots".into() });
    }
    let fun = src.functional;
    let n = word.len();
    // e[i] = e_i and a[i] = a_i in right-to-left order, 1-based edges
    let e: Vec<usize> = std::iter::once(usize::MAX).chain((1..=n).map(|i| word.path[n - i])).collect();
    let a: Vec<&CVec> = (0..=n).map(|i| &word.legs[n - i]).collect();
    let mut out = CMat::zeros(dst.dim(), src.dim());
    let mut valid = vec![true; src.dim()];
    for blk in src.blocks.iter().filter(|b| keep(b)) {
        let mu = &blk.path;
        let m = mu.len();
        if n + m > src.depth {
            for c in blk.range() {
                valid[c] = false;
            }
        }
        let f = |j: usize| mu[j - 1];
        let mut n0 = 0;
        while n0 < n.min(m) && e[n0 + 1] == g.graph.bar(f(n0 + 1)) {
            n0 += 1;
        }
        let src_chain = (src.root, mu.as_slice(), fun);
        // x[k]: column α = x_k of the α-th orthonormal vector of stage k of μ
        let mut x: Vec<CMat> = Vec::with_capacity(n0 + 1);
        let st0 = engine.stage(src.root, mu, 0, fun);
        let alg0 = g.vertex_algebra(src.root);
        x.push(alg0.left_matrix(a[0]) * &st0.coef);
        for k in 1..=n0 {
            let st = engine.stage(src.root, mu, k, fun);
            let v = g.graph.range(f(k));
            let alg = g.vertex_algebra(v);
            let t = g.transfer(f(k));
            let left = alg.left_matrix(a[k]);
            let prev = &x[k - 1];
            let mut z = CMat::zeros(alg.dim(), st.n_gen());
            for beta in 0..prev.ncols() {
                let tx = &left * (t * prev.column(beta));
                for l in 0..st.n_leg {
                    let col = alg.mul(&tx, &st.legs.column(l).into_owned());
                    z.set_column(beta * st.n_leg + l, &col);
                }
            }
            x.push(z * &st.coef);
        }
        // complement terms
        for k in 1..=n0 {
            let mut tau: Vec<usize> = word.path[..=n - k].to_vec();
            tau.extend_from_slice(&mu[k - 1..]);
            let Some(tb) = dst.block(&tau) else { continue };
            let prefix: Vec<CVec> = word.legs[..=n - k].to_vec();
            let c_pre = engine.prefix_coords(dst.root, &tau, fun, &prefix, n - k);
            let tgt = engine.stage(dst.root, &tau, n - k + 1, fun);
            let p = g.complement(f(k));
            let prev = &x[k - 1];
            let mut mprev = CMat::zeros(tgt.dim(), prev.ncols());
            for beta in 0..prev.ncols() {
                let y = p * prev.column(beta);
                mprev.set_column(beta, &(&tgt.restrict * kron_vec(&c_pre, &y)));
            }
            let mtot = engine.transfer(mprev, src_chain, k - 1, (dst.root, tau.as_slice(), fun), n - k + 1);
            let mut view = out.view_mut((tb.offset, blk.offset), (tb.dim(), blk.dim()));
            view += mtot;
        }
        // remaining term
        let (tau, mprev, kt) = if n0 < n {
            let mut tau: Vec<usize> = word.path[..n - n0].to_vec();
            tau.extend_from_slice(&mu[n0..]);
            if dst.block(&tau).is_none() {
                continue;
            }
            let prefix: Vec<CVec> = word.legs[..n - n0].to_vec();
            let c_pre = engine.prefix_coords(dst.root, &tau, fun, &prefix, n - n0 - 1);
            let tgt = engine.stage(dst.root, &tau, n - n0, fun);
            let xs = &x[n0];
            let mut mprev = CMat::zeros(tgt.dim(), xs.ncols());
            for alpha in 0..xs.ncols() {
                let col = xs.column(alpha).into_owned();
                mprev.set_column(alpha, &(&tgt.restrict * kron_vec(&c_pre, &col)));
            }
            (tau, mprev, n - n0)
        } else {
            let tau: Vec<usize> = mu[n..].to_vec();
            if dst.block(&tau).is_none() {
                continue;
            }
            let tgt = engine.stage(dst.root, &tau, 0, fun);
            (tau, &tgt.restrict * &x[n], 0)
        };
        let tb = dst.block(&tau).expect("checked");
        let mtot = engine.transfer(mprev, src_chain, n0, (dst.root, tau.as_slice(), fun), kt);
        let mut view = out.view_mut((tb.offset, blk.offset), (tb.dim(), blk.dim()));
        view += mtot;
    }
    Ok((out, valid))
}

/// Matrix of an element of the fundamental algebra on a space rooted at `p₀`.
pub fn act(
    fundamental: &Fundamental,
    engine: &PathEngine,
    x: &ReducedWordSum,
    space: &TruncatedPathSpace,
) -> Result<(CMat, Vec<bool>), FundamentalError> {
    let mut total = CMat::zeros(space.dim(), space.dim());
    let mut valid = vec![true; space.dim()];
    let mut by_path: HashMap<Vec<usize>, Vec<Word>> = HashMap::new();
    for w in fundamental.words(x) {
        by_path.entry(w.path.clone()).or_default().push(w);
    }
    let mut keys: Vec<&Vec<usize>> = by_path.keys().collect();
    keys.sort();
    for k in keys {
        for w in &by_path[k] {
            let (m, v) = act_word(engine, w, space, space)?;
            total += m;
            for (a, b) in valid.iter_mut().zip(v) {
                *a &= b;
            }
        }
    }
    Ok((total, valid))
}

/// `word · ξ`, computing only the columns of blocks on which `ξ` is supported.
pub fn apply_word(
    engine: &PathEngine,
    word: &Word,
    src: &TruncatedPathSpace,
    dst: &TruncatedPathSpace,
    xi: &CVec,
) -> Result<CVec, FundamentalError> {
    let supported = |b: &Block| b.range().any(|i| xi[i] != ZERO);
    let (m, valid) = act_word_on(engine, word, src, dst, &supported)?;
    apply_masked(&m, &valid, xi)
}

/// `x · ξ` for an element of the fundamental algebra, term by term.
pub fn apply(
    fundamental: &Fundamental,
    engine: &PathEngine,
    x: &ReducedWordSum,
    space: &TruncatedPathSpace,
    xi: &CVec,
) -> Result<CVec, FundamentalError> {
    let mut out = CVec::zeros(space.dim());
    for w in fundamental.words(x) {
        out += apply_word(engine, &w, space, space, xi)?;
    }
    Ok(out)
}

/// `word · ξ` for a raw word, letter by letter from the right.
pub fn apply_raw(spaces: &SpaceSet, word: &Word, xi: &CVec) -> Result<CVec, FundamentalError> {
    let g = spaces.engine.graph();
    let n = word.len();
    let end = word.end(g);
    let last = Word::vertex(end, word.legs[n].clone());
    let mut v = apply_word(spaces.engine, &last, spaces.root(end), spaces.root(end), xi)?;
    for i in (1..=n).rev() {
        let e = word.path[i - 1];
        let s = g.graph.source(e);
        let letter =
            Word { start: s, path: vec![e], legs: vec![word.legs[i - 1].clone(), g.vertex_algebra(g.graph.range(e)).unit().clone()] };
        v = apply_word(spaces.engine, &letter, spaces.root(g.graph.range(e)), spaces.root(s), &v)?;
    }
    Ok(v)
}

/// Applies a matrix with validity mask to a vector.
pub fn apply_masked(m: &CMat, valid: &[bool], xi: &CVec) -> Result<CVec, FundamentalError> {
    let mass: f64 = xi.iter().zip(valid).filter(|(_, v)| !**v).map(|(z, _)| z.norm_sqr()).sum::<f64>().sqrt();
    if mass >= 1e-12 {
        return Err(FundamentalError::DomainExceeded { mass });
    }
    Ok(m * xi)
}

/// Action of a raw word, letter by letter through the product formula.
pub fn act_raw(spaces: &SpaceSet, word: &Word) -> Result<(CMat, Vec<bool>), FundamentalError> {
    let g = spaces.engine.graph();
    let n = word.len();
    let end = word.end(g);
    let last = Word::vertex(end, word.legs[n].clone());
    let (mut m, mut valid) = act_word(spaces.engine, &last, spaces.root(end), spaces.root(end))?;
    for i in (1..=n).rev() {
        let e = word.path[i - 1];
        let s = g.graph.source(e);
        let letter =
            Word { start: s, path: vec![e], legs: vec![word.legs[i - 1].clone(), g.vertex_algebra(g.graph.range(e)).unit().clone()] };
        let (li, vi) = act_word(spaces.engine, &letter, spaces.root(g.graph.range(e)), spaces.root(s))?;
        valid = compose_valid(&m, &valid, &vi);
        m = li * m;
    }
    Ok((m, valid))
}

/// Columns of `m` that stay valid when followed by an operator valid on `next_valid`.
fn compose_valid(m: &CMat, valid: &[bool], next_valid: &[bool]) -> Vec<bool> {
    (0..m.ncols()).map(|c| valid[c] && (0..m.nrows()).all(|r| next_valid[r] || m[(r, c)].norm() < 1e-12)).collect()
}

/// The edge unitary `u_e`, built directly from "prepend `e`, or collapse across `ē`".
pub fn edge_unitary(
    engine: &PathEngine,
    e: usize,
    src: &TruncatedPathSpace,
    dst: &TruncatedPathSpace,
) -> Result<(CMat, Vec<bool>), FundamentalError> {
    check_pair(src, dst)?;
    let g = engine.graph();
    if src.root != g.graph.range(e) || dst.root != g.graph.source(e) {
        return Err(FundamentalError::SpaceMismatch { reason: "edge endpoints do not match the space roots".into() });
    }
    let fun = src.functional;
    let mut out = CMat::zeros(dst.dim(), src.dim());
    let mut valid = vec![true; src.dim()];
    let s_alg = g.vertex_algebra(dst.root);
    for blk in &src.blocks {
        let w = &blk.path;
        let chain = (src.root, w.as_slice(), fun);
        let c0 = engine.stage(src.root, w, 0, fun);
        let mut tau = vec![e];
        tau.extend_from_slice(w);
        let t0 = engine.stage(dst.root, &tau, 0, fun);
        let t1 = engine.stage(dst.root, &tau, 1, fun);
        let iota = &t0.restrict * s_alg.unit();
        let iota = CMat::from_column_slice(iota.len(), 1, iota.as_slice());
        let m1 = &t1.restrict * kron(&iota, &c0.coef);
        let prepend = engine.transfer(m1, chain, 0, (dst.root, tau.as_slice(), fun), 1);
        if tau.len() > src.depth {
            if linalg::max_abs(&prepend) > 1e-12 {
                for c in blk.range() {
                    valid[c] = false;
                }
            }
        } else if let Some(tb) = dst.block(&tau) {
            let mut view = out.view_mut((tb.offset, blk.offset), (tb.dim(), blk.dim()));
            view += prepend;
        }
        if !w.is_empty() && w[0] == g.graph.bar(e) {
            let rest = &w[1..];
            let Some(tb) = dst.block(rest) else { continue };
            let st1 = engine.stage(src.root, w, 1, fun);
            let t = g.transfer(w[0]);
            let alg = g.vertex_algebra(g.graph.range(w[0]));
            let mut z = CMat::zeros(alg.dim(), st1.n_gen());
            for beta in 0..c0.dim() {
                let tv = t * c0.coef.column(beta);
                for l in 0..st1.n_leg {
                    z.set_column(beta * st1.n_leg + l, &alg.mul(&tv, &st1.legs.column(l).into_owned()));
                }
            }
            let tgt0 = engine.stage(dst.root, rest, 0, fun);
            let m0 = &tgt0.restrict * z * &st1.coef;
            let collapse = engine.transfer(m0, chain, 1, (dst.root, rest, fun), 0);
            let mut view = out.view_mut((tb.offset, blk.offset), (tb.dim(), blk.dim()));
            view += collapse;
        }
    }
    Ok((out, valid))
}

/// Compositional model of a raw word: products of edge unitaries and leg multiplications.
pub fn compose_word(spaces: &SpaceSet, word: &Word) -> Result<(CMat, Vec<bool>), FundamentalError> {
    let g = spaces.engine.graph();
    let verts = word.vertices(g);
    let n = word.len();
    let left = |v: usize, a: &CVec| -> Result<CMat, FundamentalError> {
        let sp = spaces.root(v);
        Ok(act_word(spaces.engine, &Word::vertex(v, a.clone()), sp, sp)?.0)
    };
    let mut m = left(verts[n], &word.legs[n])?;
    let mut valid = vec![true; m.ncols()];
    for i in (1..=n).rev() {
        let e = word.path[i - 1];
        let (u, vu) = edge_unitary(spaces.engine, e, spaces.root(g.graph.range(e)), spaces.root(g.graph.source(e)))?;
        valid = compose_valid(&m, &valid, &vu);
        m = left(verts[i - 1], &word.legs[i - 1])? * u * m;
    }
    Ok((m, valid))
}

/// The vector `Ω = 1̂` of the empty block.
pub fn vacuum(engine: &PathEngine, space: &TruncatedPathSpace) -> CVec {
    let g = engine.graph();
    let unit = g.vertex_algebra(space.root).unit().clone();
    let v = engine.tensor_coords(space.root, &[], space.functional, &[unit]);
    space.embed(&[], &v)
}

/// Maximal deviation between `⟨Ω, xΩ⟩` computed from `p₀` and from the
/// alternate base `p`, for each sample, against the normal-form value.
pub fn base_change_check(fundamental: &Fundamental, p: usize, samples: &[ReducedWordSum]) -> Result<f64, FundamentalError> {
    let g = fundamental.graph();
    let engine = PathEngine::new(g);
    let p0 = fundamental.base();
    let geo = g.geodesic(p0, p);
    let mut worst: f64 = 0.0;
    for xx in samples {
        let expected = fundamental.fundamental_state(xx);
        let depth = (xx.max_len() + geo.len()).max(1);
        let home = SpaceSet::new(&engine, p0, depth, Functional::State)?;
        let away = SpaceSet::new(&engine, p, depth, Functional::State)?;
        let omega = vacuum(&engine, home.root(p0));
        let v = apply(fundamental, &engine, xx, home.root(p0), &omega)?;
        let at_home = omega.dotc(&v);
        let mut omega_p = vacuum(&engine, away.root(p));
        for &e in geo.iter().rev() {
            let (u, valid) = edge_unitary(&engine, e, away.root(g.graph.range(e)), away.root(g.graph.source(e)))?;
            omega_p = apply_masked(&u, &valid, &omega_p)?;
        }
        let v = apply(fundamental, &engine, xx, away.root(p0), &omega_p)?;
        let at_p = omega_p.dotc(&v);
        worst = worst.max((at_home - expected).norm()).max((at_p - expected).norm());
    }
    Ok(worst)
}

/// Largest gap, over valid columns, between the closed-form action of random
/// reduced words of length at most `max_len` and their letter-by-letter composition.
pub fn product_formula_residual(
    g: &AlgebraGraph,
    seed: u64,
    samples: usize,
    max_len: usize,
    depth: usize,
) -> Result<f64, FundamentalError> {
    use rand::Rng;
    let engine = PathEngine::new(g);
    let spaces = SpaceSet::new(&engine, g.base(), depth, Functional::State)?;
    let mut s = crate::sampling::WordSampler::new(g, seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let len = s.length(max_len);
        let start = s.rng().gen_range(0..g.graph.vertex_count());
        let w = s.reduced_word(start, len);
        let src = spaces.root(w.end(g));
        let (m, valid) = act_word(&engine, &w, src, spaces.root(w.start))?;
        let (c, cvalid) = compose_word(&spaces, &w)?;
        let cols: Vec<usize> = (0..src.dim()).filter(|&i| valid[i] && cvalid[i]).collect();
        worst = worst.max(linalg::max_abs(&linalg::columns(&(m - c), &cols)));
    }
    Ok(worst)
}

/// Largest gap between the state of the normal form of a random raw loop and
/// its vacuum expectation in the path-module representation.
pub fn vacuum_coherence_residual(g: &AlgebraGraph, seed: u64, samples: usize, max_len: usize) -> Result<f64, FundamentalError> {
    let f = Fundamental::new(g);
    let engine = PathEngine::new(g);
    let mut s = crate::sampling::WordSampler::new(g, seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let len = s.length(max_len);
        let w = s.raw_loop(g.base(), len);
        let spaces = SpaceSet::new(&engine, g.base(), w.len().max(1), Functional::State)?;
        let omega = vacuum(&engine, spaces.root(g.base()));
        let v = apply_raw(&spaces, &w, &omega)?;
        let lhs = f.fundamental_state(&f.reduce(&w)?);
        worst = worst.max((lhs - omega.dotc(&v)).norm());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn basis(g: &AlgebraGraph, v: usize, i: usize) -> CVec {
        g.vertex_algebra(v).basis_vector(i)
    }

    #[test]
    fn edge_and_reverse_cancel() {
        let g = fixtures::z2_free_product();
        let f = Fundamental::new(&g);
        let e = g.graph.edge_id("e").unwrap();
        let w = Word::edge(&g, e).concat(&g, &Word::edge(&g, g.graph.bar(e)));
        let x = f.reduce(&w).unwrap();
        assert_eq!(x, f.one());
    }

    #[test]
    fn reduced_words_are_kept() {
        let g = fixtures::z2_free_product();
        let f = Fundamental::new(&g);
        let e = g.graph.edge_id("e").unwrap();
        let eb = g.graph.bar(e);
        let w = Word::new(&g, 0, vec![e, eb], vec![basis(&g, 0, 1), basis(&g, 1, 1), basis(&g, 0, 0)]).unwrap();
        let x = f.reduce(&w).unwrap();
        assert_eq!(x.term_count(), 1);
        assert_eq!(x.max_len(), 2);
        assert!(f.fundamental_state(&x).norm() < 1e-14);
        let x2 = f.multiply(&x, &x).unwrap();
        assert_eq!(x2.max_len(), 4);
        assert_eq!(x2.term_count(), 1);
    }

    #[test]
    fn amalgam_edge_group_passes_through() {
        let g = fixtures::z4_amalgam();
        let f = Fundamental::new(&g);
        let e = g.graph.edge_id("e").unwrap();
        let w = Word::new(&g, 0, vec![e, g.graph.bar(e)], vec![basis(&g, 0, 0), basis(&g, 1, 2), basis(&g, 0, 0)]).unwrap();
        let x = f.reduce(&w).unwrap();
        assert_eq!(x.max_len(), 0);
        assert!(f.distance(&x, &f.vertex(basis(&g, 0, 2))).unwrap() < 1e-12);
    }

    #[test]
    fn adjoint_reverses_words() {
        let g = fixtures::z4_amalgam();
        let f = Fundamental::new(&g);
        let e = g.graph.edge_id("e").unwrap();
        let w = Word::new(&g, 0, vec![e, g.graph.bar(e)], vec![basis(&g, 0, 1), basis(&g, 1, 1), basis(&g, 0, 0)]).unwrap();
        let x = f.reduce(&w).unwrap();
        let xs = f.adjoint(&x);
        let expected =
            f.reduce(&Word::new(&g, 0, vec![e, g.graph.bar(e)], vec![basis(&g, 0, 0), basis(&g, 1, 3), basis(&g, 0, 3)]).unwrap()).unwrap();
        assert!(f.distance(&xs, &expected).unwrap() < 1e-12);
        assert!(f.distance(&f.adjoint(&xs), &x).unwrap() < 1e-12);
    }

    #[test]
    fn free_product_fourth_moment() {
        let g = fixtures::z2_free_product();
        let f = Fundamental::new(&g);
        let e = g.graph.edge_id("e").unwrap();
        let a = f.vertex(basis(&g, 0, 1));
        let b =
            f.reduce(&Word::new(&g, 0, vec![e, g.graph.bar(e)], vec![basis(&g, 0, 0), basis(&g, 1, 1), basis(&g, 0, 0)]).unwrap()).unwrap();
        let m = f.moments(&a.add(&b), 4).unwrap();
        assert!((m[1] - linalg::c(2.0)).norm() < 1e-12);
        assert!((m[3] - linalg::c(6.0)).norm() < 1e-12);
    }

    #[test]
    fn u_ebar_collapses_onto_vacuum() {
        let g = fixtures::integer_loop();
        let eng = PathEngine::new(&g);
        let spaces = SpaceSet::new(&eng, 0, 3, Functional::State).unwrap();
        let e = g.graph.edge_id("e").unwrap();
        let sp = spaces.root(0);
        let omega = vacuum(&eng, sp);
        let (ue, _) = edge_unitary(&eng, e, sp, sp).unwrap();
        let (ueb, _) = edge_unitary(&eng, g.graph.bar(e), sp, sp).unwrap();
        let v = &ue * &omega;
        assert!((v.norm() - 1.0).abs() < 1e-12);
        assert!((&ueb * v - &omega).norm() < 1e-12);
    }

    #[test]
    fn product_formula_matches_composition() {
        let g = fixtures::z4_amalgam();
        let eng = PathEngine::new(&g);
        let spaces = SpaceSet::new(&eng, 0, 4, Functional::State).unwrap();
        let e = g.graph.edge_id("e").unwrap();
        let eb = g.graph.bar(e);
        let w = Word::new(&g, 0, vec![e, eb], vec![basis(&g, 0, 1), basis(&g, 1, 3), basis(&g, 0, 2)]).unwrap();
        assert!(w.is_reduced(&g, 1e-12));
        let sp = spaces.root(0);
        let (m, valid) = act_word(&eng, &w, sp, sp).unwrap();
        let (c, _) = compose_word(&spaces, &w).unwrap();
        let cols: Vec<usize> = (0..sp.dim()).filter(|&i| valid[i]).collect();
        assert!(!cols.is_empty());
        let diff = linalg::columns(&(m - c), &cols);
        assert!(linalg::max_abs(&diff) < 1e-10);
    }
}

#[cfg(test)]
mod coherence {
    use super::*;
    use crate::fixtures;
    use crate::sampling::WordSampler;
    use rand::Rng;

    #[test]
    fn state_of_normal_form_matches_vacuum_expectation() {
        for (name, g) in fixtures::shipped() {
            let f = Fundamental::new(&g);
            let eng = PathEngine::new(&g);
            let mut s = WordSampler::new(&g, 5);
            for _ in 0..15 {
                let len = s.length(3);
                let w = s.raw_loop(g.base(), len);
                let spaces = SpaceSet::new(&eng, g.base(), w.len() + 1, Functional::State).unwrap();
                let sp = spaces.root(g.base());
                let omega = vacuum(&eng, sp);
                let (m, valid) = act_raw(&spaces, &w).unwrap();
                let v = apply_masked(&m, &valid, &omega).unwrap();
                let lhs = f.fundamental_state(&f.reduce(&w).unwrap());
                assert!((lhs - omega.dotc(&v)).norm() < 1e-9, "{name}: {lhs} vs {}", omega.dotc(&v));
            }
        }
    }

    #[test]
    fn random_reduced_words_match_composition() {
        for (name, g) in fixtures::shipped() {
            let eng = PathEngine::new(&g);
            let spaces = SpaceSet::new(&eng, g.base(), 5, Functional::State).unwrap();
            let mut s = WordSampler::new(&g, 9);
            for _ in 0..10 {
                let len = s.length(3);
                let start = s.rng().gen_range(0..g.graph.vertex_count());
                let w = s.reduced_word(start, len);
                let src = spaces.root(w.end(&g));
                let dst = spaces.root(w.start);
                let (m, valid) = act_word(&eng, &w, src, dst).unwrap();
                let (c, cvalid) = compose_word(&spaces, &w).unwrap();
                let cols: Vec<usize> = (0..src.dim()).filter(|&i| valid[i] && cvalid[i]).collect();
                let diff = linalg::max_abs(&linalg::columns(&(m - c), &cols));
                assert!(diff < 1e-9, "{name}: {:?} residual {diff}", w.path);
            }
        }
    }
}
