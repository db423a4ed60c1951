//! Amalgamated free product and HNN views, and a classical oracle for graphs of finite groups.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::fundamental::{Fundamental, FundamentalError, ReducedWordSum, Word};
use crate::graphcore::AlgebraGraph;
use crate::linalg::{CVec, C64, ONE, ZERO};
use crate::report::Check;
use crate::sampling::WordSampler;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UnscrewError {
    #[error("graph data is not classical group data")]
    NotClassical,
    #[error("malformed word at letter {position}: {reason}")]
    MalformedWord { position: usize, reason: String },
    #[error("graph has the wrong shape: {reason}")]
    WrongShape { reason: String },
    #[error(transparent)]
    Fundamental(#[from] FundamentalError),
}

/// A letter of a classical word.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Letter {
    Group { vertex: usize, element: usize },
    Edge(usize),
}

/// `g₀ e₁ g₁ … e_n g_n` with group elements at the visited vertices.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ClassicalWord {
    pub start: usize,
    pub path: Vec<usize>,
    pub elements: Vec<usize>,
}

/// Britton/Serre normal forms for a graph of finite groups.
#[derive(Debug, Clone)]
pub struct ClassicalOracle {
    base: usize,
    source: Vec<usize>,
    range: Vec<usize>,
    bar: Vec<usize>,
    tables: Vec<Vec<Vec<usize>>>,
    identity: Vec<usize>,
    inverse: Vec<Vec<usize>>,
    /// Edge group element to source vertex element, per edge.
    homs: Vec<Vec<usize>>,
    /// Preimage under each hom.
    preimage: Vec<BTreeMap<usize, usize>>,
}

impl ClassicalOracle {
    pub fn new(g: &AlgebraGraph) -> Result<Self, UnscrewError> {
        if !g.is_classical() {
            return Err(UnscrewError::NotClassical);
        }
        let tables: Vec<Vec<Vec<usize>>> = g.vertices.iter().map(|v| v.group_table.clone().expect("classical")).collect();
        let identity: Vec<usize> =
            tables.iter().map(|t| (0..t.len()).find(|&e| (0..t.len()).all(|x| t[e][x] == x)).expect("group table")).collect();
        let inverse = tables
            .iter()
            .zip(&identity)
            .map(|(t, &id)| (0..t.len()).map(|x| (0..t.len()).find(|&y| t[x][y] == id).expect("inverse")).collect())
            .collect();
        let ne = g.graph.edge_count();
        let homs: Vec<Vec<usize>> = (0..ne).map(|e| g.group_hom(e).expect("classical")).collect();
        let preimage = homs.iter().map(|h| h.iter().enumerate().map(|(b, &x)| (x, b)).collect()).collect();
        Ok(ClassicalOracle {
            base: g.base(),
            source: (0..ne).map(|e| g.graph.source(e)).collect(),
            range: (0..ne).map(|e| g.graph.range(e)).collect(),
            bar: (0..ne).map(|e| g.graph.bar(e)).collect(),
            tables,
            identity,
            inverse,
            homs,
            preimage,
        })
    }

    pub fn base(&self) -> usize {
        self.base
    }

    pub fn identity(&self, v: usize) -> usize {
        self.identity[v]
    }

    pub fn order(&self, v: usize) -> usize {
        self.tables[v].len()
    }

    fn mul(&self, v: usize, x: usize, y: usize) -> usize {
        self.tables[v][x][y]
    }

    /// Builds a word from letters, starting at `start`.
    pub fn word(&self, start: usize, letters: &[Letter]) -> Result<ClassicalWord, UnscrewError> {
        let mut w = ClassicalWord { start, path: Vec::new(), elements: vec![self.identity[start]] };
        let mut v = start;
        for (i, l) in letters.iter().enumerate() {
            match *l {
                Letter::Group { vertex, element } => {
                    if vertex != v || element >= self.order(v) {
                        return Err(UnscrewError::MalformedWord {
                            position: i,
                            reason: "group element is not at the current vertex".into(),
                        });
                    }
                    let last = w.elements.last_mut().expect("nonempty");
                    *last = self.tables[v][*last][element];
                }
                Letter::Edge(e) => {
                    if e >= self.source.len() || self.source[e] != v {
                        return Err(UnscrewError::MalformedWord { position: i, reason: "edge does not leave the current vertex".into() });
                    }
                    v = self.range[e];
                    w.path.push(e);
                    w.elements.push(self.identity[v]);
                }
            }
        }
        Ok(w)
    }

    pub fn end(&self, w: &ClassicalWord) -> usize {
        w.path.last().map_or(w.start, |&e| self.range[e])
    }

    pub fn concat(&self, x: &ClassicalWord, y: &ClassicalWord) -> Result<ClassicalWord, UnscrewError> {
        let v = self.end(x);
        if v != y.start {
            return Err(UnscrewError::MalformedWord { position: x.path.len(), reason: "words do not compose".into() });
        }
        let mut elements = x.elements[..x.elements.len() - 1].to_vec();
        elements.push(self.mul(v, *x.elements.last().expect("nonempty"), y.elements[0]));
        elements.extend_from_slice(&y.elements[1..]);
        let mut path = x.path.clone();
        path.extend_from_slice(&y.path);
        Ok(ClassicalWord { start: x.start, path, elements })
    }

    pub fn inverse_word(&self, w: &ClassicalWord) -> ClassicalWord {
        let verts: Vec<usize> = std::iter::once(w.start).chain(w.path.iter().map(|&e| self.range[e])).collect();
        ClassicalWord {
            start: self.end(w),
            path: w.path.iter().rev().map(|&e| self.bar[e]).collect(),
            elements: w.elements.iter().zip(&verts).rev().map(|(&x, &v)| self.inverse[v][x]).collect(),
        }
    }

    /// Britton reduction followed by left-coset transversal normalization.
    pub fn normal_form(&self, w: &ClassicalWord) -> ClassicalWord {
        let mut path = w.path.clone();
        let mut el = w.elements.clone();
        let mut i = 1;
        while i < path.len() {
            let (e, f) = (path[i - 1], path[i]);
            match (f == self.bar[e]).then(|| self.preimage[f].get(&el[i])).flatten() {
                Some(&b) => {
                    let v = self.source[e];
                    let merged = self.mul(v, self.mul(v, el[i - 1], self.homs[e][b]), el[i + 1]);
                    path.drain(i - 1..=i);
                    el.splice(i - 1..=i + 1, [merged]);
                    i = i.saturating_sub(1).max(1);
                }
                None => i += 1,
            }
        }
        for i in 0..path.len() {
            let f = path[i];
            let v = self.source[f];
            let coset: Vec<usize> = self.homs[f].iter().map(|&h| self.mul(v, el[i], h)).collect();
            let t = *coset.iter().min().expect("nonempty");
            let b = self.preimage[f][&self.mul(v, self.inverse[v][t], el[i])];
            let r = self.range[f];
            el[i] = t;
            el[i + 1] = self.mul(r, self.homs[self.bar[f]][b], el[i + 1]);
        }
        ClassicalWord { start: w.start, path, elements: el }
    }

    pub fn is_identity(&self, w: &ClassicalWord) -> bool {
        let n = self.normal_form(w);
        n.path.is_empty() && n.elements[0] == self.identity[n.start]
    }

    /// `φ(xⁿ)` for `x = Σ cᵢ wᵢ`, by counting products that reduce to the identity.
    pub fn moments(&self, terms: &[(C64, ClassicalWord)], max_degree: usize) -> Result<Vec<C64>, UnscrewError> {
        let id = ClassicalWord { start: self.base, path: Vec::new(), elements: vec![self.identity[self.base]] };
        let mut layer: Vec<(C64, ClassicalWord)> = vec![(ONE, id)];
        let mut out = Vec::with_capacity(max_degree);
        for _ in 0..max_degree {
            let mut next: BTreeMap<ClassicalWord, C64> = BTreeMap::new();
            for (c, w) in &layer {
                for (d, t) in terms {
                    let p = self.normal_form(&self.concat(w, t)?);
                    *next.entry(p).or_insert(ZERO) += c * d;
                }
            }
            layer = next.into_iter().filter(|(_, c)| c.norm() > 0.0).map(|(w, c)| (c, w)).collect();
            out.push(layer.iter().filter(|(_, w)| self.is_identity(w)).map(|(c, _)| *c).sum());
        }
        Ok(out)
    }

    /// The group-algebra word with the same letters.
    pub fn to_word(&self, g: &AlgebraGraph, w: &ClassicalWord) -> Word {
        let verts: Vec<usize> = std::iter::once(w.start).chain(w.path.iter().map(|&e| self.range[e])).collect();
        Word {
            start: w.start,
            path: w.path.clone(),
            legs: w.elements.iter().zip(verts).map(|(&x, v)| g.vertex_algebra(v).basis_vector(x)).collect(),
        }
    }

    /// Closed word at the base: random walk plus tree geodesic home, random elements.
    pub fn sample(&self, g: &AlgebraGraph, sampler: &mut WordSampler, len: usize) -> ClassicalWord {
        let w = sampler.raw_loop(self.base, len);
        let verts = w.vertices(g);
        let elements = verts.iter().map(|&v| rand::Rng::gen_range(sampler.rng(), 0..self.order(v))).collect();
        ClassicalWord { start: self.base, path: w.path, elements }
    }
}

/// `φ(w) = 1` exactly when `w` reduces to the identity, on sampled closed words.
pub fn haar_state_check(g: &AlgebraGraph, seed: u64, samples: usize, max_len: usize) -> Result<Check, UnscrewError> {
    let oracle = ClassicalOracle::new(g)?;
    let f = Fundamental::new(g);
    let mut sampler = WordSampler::new(g, seed);
    let diam = (0..g.graph.vertex_count()).map(|v| g.geodesic(v, g.base()).len()).max().unwrap_or(0);
    let walk = max_len.saturating_sub(diam).max(1) / 2;
    let mut worst: f64 = 0.0;
    let mut identities = 0;
    for i in 0..samples {
        let len = sampler.length(walk);
        let mut w = oracle.sample(g, &mut sampler, len);
        if i % 2 == 1 {
            let mut tail = oracle.inverse_word(&w);
            if i % 4 == 3 {
                let v = oracle.base;
                let k = rand::Rng::gen_range(sampler.rng(), 0..oracle.order(v));
                tail.elements[0] = oracle.mul(v, k, tail.elements[0]);
            }
            w = oracle.concat(&w, &tail)?;
        }
        let expected = if oracle.is_identity(&w) {
            identities += 1;
            ONE
        } else {
            ZERO
        };
        let x = f.reduce(&oracle.to_word(g, &w))?;
        worst = worst.max((f.fundamental_state(&x) - expected).norm());
    }
    Ok(Check::at_most("haar state equals identity indicator", worst, 1e-12).with_detail(format!("{samples} words, {identities} trivial")))
}

/// Two-vertex segment seen as `A_p *_B A_q`.
pub struct FreeProductView<'g> {
    g: &'g AlgebraGraph,
    /// Edge from the base vertex to the other vertex.
    pub edge: usize,
    pub left: usize,
    pub right: usize,
}

impl<'g> FreeProductView<'g> {
    pub fn new(g: &'g AlgebraGraph) -> Result<Self, UnscrewError> {
        if g.graph.vertex_count() != 2 || g.graph.edge_count() != 2 {
            return Err(UnscrewError::WrongShape { reason: "a free product view needs one edge pair between two vertices".into() });
        }
        let left = g.base();
        let edge = g
            .graph
            .out_edges(left)
            .into_iter()
            .next()
            .ok_or_else(|| UnscrewError::WrongShape { reason: "base vertex has no edge".into() })?;
        let right = g.graph.range(edge);
        if right == left {
            return Err(UnscrewError::WrongShape { reason: "the edge is a loop".into() });
        }
        Ok(FreeProductView { g, edge, left, right })
    }

    /// `ρ₁(a) = a` for `k = 0` and `ρ₂(a) = u_e a u_ē` for `k = 1`.
    pub fn rho(&self, f: &Fundamental, k: usize, a: &CVec) -> Result<ReducedWordSum, UnscrewError> {
        if k == 0 {
            return Ok(f.vertex(a.clone()));
        }
        let g = self.g;
        let e = self.edge;
        let w = Word {
            start: self.left,
            path: vec![e, g.graph.bar(e)],
            legs: vec![g.vertex_algebra(self.left).unit().clone(), a.clone(), g.vertex_algebra(self.left).unit().clone()],
        };
        Ok(f.reduce(&w)?)
    }

    /// Factor expectation onto the amalgamated subalgebra.
    pub fn factor_expectation(&self, k: usize, a: &CVec) -> CVec {
        let e = if k == 0 { self.edge } else { self.g.graph.bar(self.edge) };
        self.g.expectation(e) * a
    }

    /// Expectation of the fundamental algebra onto `B` inside `A_{p₀}`.
    pub fn expectation(&self, f: &Fundamental, x: &ReducedWordSum) -> CVec {
        self.g.expectation(self.edge) * f.expectation_onto_vertex(x)
    }

    fn vertex(&self, k: usize) -> usize {
        if k == 0 {
            self.left
        } else {
            self.right
        }
    }

    /// `E∘ρ_k = ρ_k∘E_k` and vanishing of `E` on alternating centered products.
    pub fn moments_check(&self, seed: u64, samples: usize, max_degree: usize) -> Result<Vec<Check>, UnscrewError> {
        let f = Fundamental::new(self.g);
        let mut sampler = WordSampler::new(self.g, seed);
        let mut compat: f64 = 0.0;
        let mut centered: f64 = 0.0;
        for s in 0..samples {
            for k in 0..2 {
                let a = sampler.element(self.vertex(k));
                let lhs = self.expectation(&f, &self.rho(&f, k, &a)?);
                let rhs = f.expectation_onto_vertex(&self.rho(&f, k, &self.factor_expectation(k, &a))?);
                compat = compat.max((lhs - rhs).norm());
            }
            let n = 1 + s % max_degree.max(1);
            let mut prod = f.one();
            for i in 0..n {
                let k = (i + s) % 2;
                let a = sampler.element(self.vertex(k));
                let a0 = &a - self.factor_expectation(k, &a);
                prod = f.multiply(&prod, &self.rho(&f, k, &a0)?)?;
            }
            centered = centered.max(self.expectation(&f, &prod).norm());
        }
        Ok(vec![
            Check::at_most("expectation intertwines factor embeddings", compat, 1e-9),
            Check::at_most("alternating centered products have zero expectation", centered, 1e-9),
        ])
    }
}

/// Single-vertex loop seen as an HNN extension with stable letter `v = u_ē`.
pub struct HnnView<'g> {
    g: &'g AlgebraGraph,
    pub edge: usize,
}

impl<'g> HnnView<'g> {
    pub fn new(g: &'g AlgebraGraph) -> Result<Self, UnscrewError> {
        if g.graph.vertex_count() != 1 || g.graph.edge_count() != 2 {
            return Err(UnscrewError::WrongShape { reason: "an HNN view needs one loop pair at one vertex".into() });
        }
        let edge = g.graph.positive_edges()[0];
        Ok(HnnView { g, edge })
    }

    /// `vⁿ` for any integer `n`, with `v⁻¹ = v*`.
    pub fn stable_power(&self, n: i64) -> Word {
        let g = self.g;
        let e = if n >= 0 { g.graph.bar(self.edge) } else { self.edge };
        let unit = g.vertex_algebra(0).unit().clone();
        Word { start: 0, path: vec![e; n.unsigned_abs() as usize], legs: vec![unit; n.unsigned_abs() as usize + 1] }
    }

    /// `θ = r_e∘s_e⁻¹` on `s_e(B)`.
    pub fn theta(&self, b: &CVec) -> CVec {
        self.g.embed(self.g.graph.bar(self.edge)) * b
    }

    /// `v s_e(b) v* = θ(s_e(b))` on the edge basis, and `E(reduced word) = 0`.
    pub fn relation_check(&self, seed: u64, samples: usize) -> Result<Vec<Check>, UnscrewError> {
        let g = self.g;
        let f = Fundamental::new(g);
        let e = self.edge;
        let mut rel: f64 = 0.0;
        for j in 0..g.edge_algebras[e].dim() {
            let b = g.edge_algebras[e].algebra.basis_vector(j);
            let w = self.stable_power(1).concat(g, &Word::vertex(0, g.embed(e) * &b)).concat(g, &self.stable_power(-1));
            rel = rel.max(f.distance(&f.reduce(&w)?, &f.vertex(self.theta(&b)))?);
        }
        let mut sampler = WordSampler::new(g, seed);
        let mut exp: f64 = 0.0;
        for _ in 0..samples {
            let len = 1 + sampler.length(4);
            let w = sampler.reduced_word(0, len);
            if w.is_empty() {
                continue;
            }
            exp = exp.max(f.expectation_onto_vertex(&f.reduce(&w)?).norm());
        }
        Ok(vec![
            Check::at_most("stable letter conjugates s(B) by theta", rel, 1e-9),
            Check::at_most("expectation kills reduced words", exp, 1e-9),
        ])
    }

    /// `max |φ(vⁿ) − δ_{n,0}|` over `|n| ≤ max_power`, meaningful when the vertex algebra is trivial.
    pub fn free_generator_check(&self, max_power: i64) -> Result<Check, UnscrewError> {
        let f = Fundamental::new(self.g);
        let mut worst: f64 = 0.0;
        for n in -max_power..=max_power {
            let x = f.reduce(&self.stable_power(n))?;
            let target = if n == 0 { ONE } else { ZERO };
            worst = worst.max((f.fundamental_state(&x) - target).norm());
        }
        Ok(Check::at_most("stable letter powers have Dirac moments", worst, 1e-12))
    }
}

/// Algebra built from vertex algebras by free products amalgamated over scalars.
#[derive(Debug, Clone)]
pub enum ScalarFreeAlgebra {
    Vertex(usize),
    Free(Vec<ScalarFreeAlgebra>),
}

/// Element of a [`ScalarFreeAlgebra`]: coordinates, or a sum of tagged factor products.
#[derive(Debug, Clone)]
pub enum FreeElement {
    Leaf(CVec),
    Words(Vec<(C64, Vec<(usize, FreeElement)>)>),
}

/// Moments in iterated free products over `ℂ`, by recursive centering.
pub struct ScalarFreeEngine<'g> {
    g: &'g AlgebraGraph,
}

impl<'g> ScalarFreeEngine<'g> {
    pub fn new(g: &'g AlgebraGraph) -> Self {
        ScalarFreeEngine { g }
    }

    pub fn one(&self, alg: &ScalarFreeAlgebra) -> FreeElement {
        match alg {
            ScalarFreeAlgebra::Vertex(v) => FreeElement::Leaf(self.g.vertex_algebra(*v).unit().clone()),
            ScalarFreeAlgebra::Free(_) => FreeElement::Words(vec![(ONE, Vec::new())]),
        }
    }

    /// Embeds a factor element into the free product.
    pub fn inject(&self, factor: usize, x: FreeElement) -> FreeElement {
        FreeElement::Words(vec![(ONE, vec![(factor, x)])])
    }

    pub fn add(&self, x: &FreeElement, y: &FreeElement, cy: C64) -> FreeElement {
        match (x, y) {
            (FreeElement::Leaf(a), FreeElement::Leaf(b)) => FreeElement::Leaf(a + b * cy),
            (FreeElement::Words(a), FreeElement::Words(b)) => {
                let mut out = a.clone();
                out.extend(b.iter().map(|(c, w)| (c * cy, w.clone())));
                FreeElement::Words(out)
            }
            _ => panic!("elements of different algebras"),
        }
    }

    pub fn mul(&self, alg: &ScalarFreeAlgebra, x: &FreeElement, y: &FreeElement) -> FreeElement {
        match (alg, x, y) {
            (ScalarFreeAlgebra::Vertex(v), FreeElement::Leaf(a), FreeElement::Leaf(b)) => {
                FreeElement::Leaf(self.g.vertex_algebra(*v).mul(a, b))
            }
            (ScalarFreeAlgebra::Free(_), FreeElement::Words(a), FreeElement::Words(b)) => {
                let mut out = Vec::with_capacity(a.len() * b.len());
                for (ca, wa) in a {
                    for (cb, wb) in b {
                        let mut w = wa.clone();
                        w.extend(wb.iter().cloned());
                        out.push((ca * cb, w));
                    }
                }
                FreeElement::Words(out)
            }
            _ => panic!("element does not belong to the algebra"),
        }
    }

    pub fn state(&self, alg: &ScalarFreeAlgebra, x: &FreeElement) -> C64 {
        match (alg, x) {
            (ScalarFreeAlgebra::Vertex(v), FreeElement::Leaf(a)) => self.g.vertices[*v].state.eval(a),
            (ScalarFreeAlgebra::Free(factors), FreeElement::Words(terms)) => terms
                .iter()
                .map(|(c, w)| {
                    let seq: Vec<(usize, FreeElement, bool)> = w.iter().map(|(k, e)| (*k, e.clone(), false)).collect();
                    c * self.alternating(factors, seq)
                })
                .sum(),
            _ => panic!("element does not belong to the algebra"),
        }
    }

    fn alternating(&self, factors: &[ScalarFreeAlgebra], seq: Vec<(usize, FreeElement, bool)>) -> C64 {
        let mut merged: Vec<(usize, FreeElement, bool)> = Vec::with_capacity(seq.len());
        for (k, x, c) in seq {
            match merged.last_mut() {
                Some(last) if last.0 == k => {
                    last.1 = self.mul(&factors[k], &last.1, &x);
                    last.2 = false;
                }
                _ => merged.push((k, x, c)),
            }
        }
        match merged.len() {
            0 => return ONE,
            1 => return self.state(&factors[merged[0].0], &merged[0].1),
            _ => {}
        }
        let Some(i) = merged.iter().position(|(_, _, c)| !c) else { return ZERO };
        let (k, x, _) = merged[i].clone();
        let m = self.state(&factors[k], &x);
        let centered = self.add(&x, &self.one(&factors[k]), -m);
        let mut dropped = merged.clone();
        dropped.remove(i);
        let mut kept = merged;
        kept[i] = (k, centered, true);
        let first = if m.norm() == 0.0 { ZERO } else { m * self.alternating(factors, dropped) };
        first + self.alternating(factors, kept)
    }
}

/// Moments of mixed generators on the three-vertex path, directly and through
/// the iterated view `(A_a * A_b) * A_c`.
pub fn unscrewing_coherence(g: &AlgebraGraph, seed: u64, samples: usize, max_degree: usize) -> Result<Check, UnscrewError> {
    if g.graph.vertex_count() != 3 || g.graph.edge_count() != 4 {
        return Err(UnscrewError::WrongShape { reason: "coherence needs a path on three vertices".into() });
    }
    let base = g.base();
    let far: Vec<usize> = {
        let mut v: Vec<usize> = (0..3).collect();
        v.sort_by_key(|&q| (g.geodesic(base, q).len(), q));
        v
    };
    let (a, b, c) = (far[0], far[1], far[2]);
    if g.geodesic(base, c).len() != 2 || g.edge_algebras.iter().any(|e| e.dim() != 1) {
        return Err(UnscrewError::WrongShape { reason: "coherence needs a path rooted at an end vertex with scalar edges".into() });
    }
    let f = Fundamental::new(g);
    let engine = ScalarFreeEngine::new(g);
    let inner = ScalarFreeAlgebra::Free(vec![ScalarFreeAlgebra::Vertex(a), ScalarFreeAlgebra::Vertex(b)]);
    let outer = ScalarFreeAlgebra::Free(vec![inner.clone(), ScalarFreeAlgebra::Vertex(c)]);
    let conj = |q: usize, x: &CVec| -> Result<ReducedWordSum, FundamentalError> {
        let geo = g.geodesic(base, q);
        let back: Vec<usize> = geo.iter().rev().map(|&e| g.graph.bar(e)).collect();
        let mut path = geo.clone();
        path.extend(back);
        let mut legs: Vec<CVec> = vec![g.vertex_algebra(base).unit().clone()];
        let verts: Vec<usize> = path.iter().map(|&e| g.graph.range(e)).collect();
        for (i, &v) in verts.iter().enumerate() {
            legs.push(if i + 1 == geo.len() { x.clone() } else { g.vertex_algebra(v).unit().clone() });
        }
        if geo.is_empty() {
            return Ok(f.vertex(x.clone()));
        }
        f.reduce(&Word { start: base, path, legs })
    };
    let mut sampler = WordSampler::new(g, seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let xa = sampler.element(a);
        let xb = sampler.element(b);
        let xc = sampler.element(c);
        let direct = conj(a, &xa)?.add(&conj(b, &xb)?).add(&conj(c, &xc)?);
        let lhs = f.moments(&direct, max_degree)?;
        let in_ab = engine.add(&engine.inject(0, FreeElement::Leaf(xa.clone())), &engine.inject(1, FreeElement::Leaf(xb.clone())), ONE);
        let x = engine.add(&engine.inject(0, in_ab), &engine.inject(1, FreeElement::Leaf(xc.clone())), ONE);
        let mut power = engine.one(&outer);
        for l in &lhs {
            power = engine.mul(&outer, &power, &x);
            let rhs = engine.state(&outer, &power);
            worst = worst.max((l - rhs).norm());
        }
    }
    Ok(Check::at_most("direct and iterated free product moments agree", worst, 1e-9)
        .with_detail(format!("{samples} elements, degrees 1..={max_degree}")))
}

/// A group element at `q` conjugated along the tree geodesic from the base.
pub fn conjugated_element(oracle: &ClassicalOracle, g: &AlgebraGraph, q: usize, element: usize) -> ClassicalWord {
    let geo = g.geodesic(oracle.base(), q);
    let mut letters: Vec<Letter> = geo.iter().map(|&e| Letter::Edge(e)).collect();
    letters.push(Letter::Group { vertex: q, element });
    letters.extend(geo.iter().rev().map(|&e| Letter::Edge(g.graph.bar(e))));
    oracle.word(oracle.base(), &letters).expect("tree geodesic composes")
}

/// Largest coefficient residual `|a − b|` over two moment lists.
pub fn moment_residual(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn britton_basics() {
        let g = fixtures::z2_free_product();
        let o = ClassicalOracle::new(&g).unwrap();
        let p = g.graph.vertex_id("p").unwrap();
        let gg = Letter::Group { vertex: p, element: 1 };
        assert!(o.is_identity(&o.word(p, &[]).unwrap()));
        assert!(o.is_identity(&o.word(p, &[gg, gg]).unwrap()));
        let h = conjugated_element(&o, &g, g.graph.vertex_id("q").unwrap(), 1);
        let gw = o.word(p, &[gg]).unwrap();
        let ghgh = o.concat(&o.concat(&gw, &h).unwrap(), &o.concat(&gw, &h).unwrap()).unwrap();
        assert!(!o.is_identity(&ghgh));

        let z = fixtures::integer_loop();
        let o = ClassicalOracle::new(&z).unwrap();
        let e = z.graph.edge_id("e").unwrap();
        let eb = z.graph.bar(e);
        assert!(o.is_identity(&o.word(0, &[Letter::Edge(e), Letter::Edge(eb)]).unwrap()));
        assert!(!o.is_identity(&o.word(0, &[Letter::Edge(e), Letter::Edge(e)]).unwrap()));
    }

    #[test]
    fn amalgam_normal_form_moves_edge_group() {
        let g = fixtures::z4_amalgam();
        let o = ClassicalOracle::new(&g).unwrap();
        let e = g.graph.edge_id("e").unwrap();
        let w = o.word(0, &[Letter::Group { vertex: 0, element: 3 }, Letter::Edge(e)]).unwrap();
        let n = o.normal_form(&w);
        assert_eq!(n.elements, vec![1, 2]);
        let back = o.word(0, &[Letter::Edge(e), Letter::Group { vertex: 1, element: 2 }, Letter::Edge(g.graph.bar(e))]).unwrap();
        let n = o.normal_form(&back);
        assert!(n.path.is_empty());
        assert_eq!(n.elements, vec![2]);
    }

    #[test]
    fn central_binomial_moments() {
        let g = fixtures::z2_free_product();
        let o = ClassicalOracle::new(&g).unwrap();
        let p = g.graph.vertex_id("p").unwrap();
        let terms = vec![
            (ONE, o.word(p, &[Letter::Group { vertex: p, element: 1 }]).unwrap()),
            (ONE, conjugated_element(&o, &g, g.graph.vertex_id("q").unwrap(), 1)),
        ];
        let m = o.moments(&terms, 6).unwrap();
        for (k, expected) in [(2, 2.0), (4, 6.0), (6, 20.0)] {
            assert!((m[k - 1] - crate::linalg::c(expected)).norm() < 1e-12);
        }
    }

    #[test]
    fn haar_state_on_classical_fixtures() {
        for g in [fixtures::z2_free_product(), fixtures::integer_loop(), fixtures::z4_amalgam(), fixtures::z4_hnn()] {
            let c = haar_state_check(&g, 1, 40, 6).unwrap();
            assert!(c.pass, "{c:?}");
        }
    }

    #[test]
    fn free_product_and_hnn_views() {
        let g = fixtures::z4_amalgam();
        for c in FreeProductView::new(&g).unwrap().moments_check(2, 6, 4).unwrap() {
            assert!(c.pass, "{c:?}");
        }
        for g in [fixtures::z4_hnn(), fixtures::integer_loop()] {
            let h = HnnView::new(&g).unwrap();
            for c in h.relation_check(3, 10).unwrap() {
                assert!(c.pass, "{c:?}");
            }
        }
        let z = fixtures::integer_loop();
        assert!(HnnView::new(&z).unwrap().free_generator_check(6).unwrap().pass);
    }

    #[test]
    fn iterated_free_product_agrees() {
        let g = fixtures::z2_path3();
        let c = unscrewing_coherence(&g, 4, 3, 6).unwrap();
        assert!(c.pass, "{c:?}");
    }
}
