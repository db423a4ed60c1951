//! Concrete finite-dimensional *-algebras with faithful states.
//!
//! An algebra is a span of matrices inside a fixed `M_n`, and every element
//! is handled through its coordinate vector in that basis. Multiplication and
//! adjoint act on coordinates through precomputed structure matrices, so the
//! ambient matrices are only touched at construction time.

use std::sync::Arc;

use thiserror::Error;

use crate::linalg::{self, c, conj_mat, conj_vec, CMat, CVec, C64, ONE, ZERO};

/// Relative tolerance for certifying algebraic laws.
pub const CERT_TOL: f64 = 1e-10;
/// Smallest admissible eigenvalue of a faithful state.
pub const FAITHFUL_CUTOFF: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgebraError {
    #[error("table is not a group law: {law} fails at {indices:?}")]
    NonGroupTable { law: &'static str, indices: Vec<usize> },
    #[error("basis does not span a unital *-algebra: {law} fails at {indices:?} (residual {residual:.3e})")]
    NotAlgebra { law: &'static str, indices: Vec<usize>, residual: f64 },
    #[error("map is not a unital injective *-homomorphism: {law} fails at {indices:?} (residual {residual:.3e})")]
    NotHomomorphism { law: &'static str, indices: Vec<usize>, residual: f64 },
    #[error("embedding does not preserve the states at source basis index {index} (residual {residual:.3e})")]
    NotStatePreserving { index: usize, residual: f64 },
    #[error("no state-preserving conditional expectation: {law} fails at {indices:?} (residual {residual:.3e})")]
    NoModularCompatibility { law: &'static str, indices: Vec<usize>, residual: f64 },
    #[error("state is degenerate: smallest eigenvalue {min_eigenvalue:.3e}")]
    DegenerateState { min_eigenvalue: f64 },
    #[error("invalid state density: {reason}")]
    InvalidState { reason: String },
    #[error("functional is not a counit: {law} fails at {indices:?} (residual {residual:.3e})")]
    NotCounit { law: &'static str, indices: Vec<usize>, residual: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

fn scaled(residual: f64, size: f64) -> f64 {
    residual / (1.0 + size)
}

/// A unital *-subalgebra of `M_n` given by a basis.
#[derive(Debug, Clone)]
pub struct MatrixStarAlgebra {
    label: String,
    ambient_dim: usize,
    basis: Vec<CMat>,
    coord: CMat,
    left: Vec<CMat>,
    star: CMat,
    unit: CVec,
}

impl MatrixStarAlgebra {
    pub fn new(label: impl Into<String>, basis: Vec<CMat>) -> Result<Self, AlgebraError> {
        let d = basis.len();
        let n = basis.first().map(|b| b.nrows()).unwrap_or(0);
        if d == 0 || n == 0 {
            return Err(AlgebraError::NotAlgebra { law: "nonempty basis", indices: vec![], residual: 1.0 });
        }
        for (i, b) in basis.iter().enumerate() {
            if b.nrows() != n || b.ncols() != n {
                return Err(AlgebraError::NotAlgebra { law: "square basis matrices of the ambient size", indices: vec![i], residual: 1.0 });
            }
        }
        let vecs = CMat::from_fn(n * n, d, |r, k| basis[k][(r % n, r / n)]);
        let sv = linalg::singular_values(&vecs);
        if sv.len() < d || sv[d - 1] <= CERT_TOL * sv[0] {
            return Err(AlgebraError::NotAlgebra {
                law: "linear independence",
                indices: (0..d).collect(),
                residual: sv.last().cloned().unwrap_or(0.0),
            });
        }
        let coord = linalg::pinv(&vecs);
        let mut alg = MatrixStarAlgebra {
            label: label.into(),
            ambient_dim: n,
            basis,
            coord,
            left: Vec::new(),
            star: CMat::zeros(d, d),
            unit: CVec::zeros(d),
        };
        let id = CMat::identity(n, n);
        let (unit, r) = alg.project(&id);
        if r > CERT_TOL {
            return Err(AlgebraError::NotAlgebra { law: "identity in span", indices: vec![], residual: r });
        }
        alg.unit = unit;
        for i in 0..d {
            let (s, r) = alg.project(&alg.basis[i].adjoint());
            if r > CERT_TOL {
                return Err(AlgebraError::NotAlgebra { law: "adjoint closure", indices: vec![i], residual: r });
            }
            alg.star.set_column(i, &s);
        }
        let mut left = vec![CMat::zeros(d, d); d];
        for i in 0..d {
            for j in 0..d {
                let (p, r) = alg.project(&(&alg.basis[i] * &alg.basis[j]));
                if r > CERT_TOL {
                    return Err(AlgebraError::NotAlgebra { law: "product closure", indices: vec![i, j], residual: r });
                }
                left[i].set_column(j, &p);
            }
        }
        alg.left = left;
        Ok(alg)
    }

    /// Coordinates of an ambient matrix and the relative residual of the fit.
    fn project(&self, m: &CMat) -> (CVec, f64) {
        let n = self.ambient_dim;
        let v = CVec::from_fn(n * n, |r, _| m[(r % n, r / n)]);
        let x = &self.coord * &v;
        let back = self.element(&x);
        (x, scaled((back - m).norm(), m.norm()))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn basis(&self) -> &[CMat] {
        &self.basis
    }

    /// Coordinates of an ambient matrix assumed to lie in the algebra.
    pub fn coords(&self, m: &CMat) -> CVec {
        self.project(m).0
    }

    /// Coordinates together with the residual of the fit.
    pub fn coords_checked(&self, m: &CMat) -> (CVec, f64) {
        self.project(m)
    }

    pub fn element(&self, x: &CVec) -> CMat {
        let n = self.ambient_dim;
        let mut m = CMat::zeros(n, n);
        for (k, b) in self.basis.iter().enumerate() {
            if x[k] != ZERO {
                m += b * x[k];
            }
        }
        m
    }

    pub fn unit(&self) -> &CVec {
        &self.unit
    }

    pub fn basis_vector(&self, i: usize) -> CVec {
        linalg::unit_vector(self.dim(), i)
    }

    pub fn mul(&self, x: &CVec, y: &CVec) -> CVec {
        self.left_matrix(x) * y
    }

    pub fn star(&self, x: &CVec) -> CVec {
        &self.star * conj_vec(x)
    }

    /// Matrix of `y ↦ x·y` in coordinates.
    pub fn left_matrix(&self, x: &CVec) -> CMat {
        let d = self.dim();
        let mut m = CMat::zeros(d, d);
        for k in 0..d {
            if x[k] != ZERO {
                m += &self.left[k] * x[k];
            }
        }
        m
    }

    /// Matrix of `x ↦ x·y` in coordinates.
    pub fn right_matrix(&self, y: &CVec) -> CMat {
        let d = self.dim();
        let mut m = CMat::zeros(d, d);
        for j in 0..d {
            m.set_column(j, &(&self.left[j] * y));
        }
        m
    }

    /// Matrix `K` with `star(x) = K·conj(x)`.
    pub fn star_matrix(&self) -> &CMat {
        &self.star
    }

    /// Full matrix algebra `M_n` with the matrix-unit basis `e_{ij}` in row-major order.
    pub fn full(label: impl Into<String>, n: usize) -> Self {
        let basis = (0..n * n)
            .map(|k| {
                let mut m = CMat::zeros(n, n);
                m[(k / n, k % n)] = ONE;
                m
            })
            .collect();
        Self::new(label, basis).expect("matrix units span M_n")
    }

    pub fn scalars(label: impl Into<String>) -> Self {
        Self::new(label, vec![CMat::identity(1, 1)]).expect("C is an algebra")
    }
}

/// A faithful state `x ↦ tr(ρ x)` restricted to an algebra.
#[derive(Debug, Clone)]
pub struct StateFunctional {
    density: CMat,
    values: CVec,
}

impl StateFunctional {
    pub fn new(algebra: &MatrixStarAlgebra, density: CMat) -> Result<Self, AlgebraError> {
        let n = algebra.ambient_dim();
        if density.nrows() != n || density.ncols() != n {
            return Err(AlgebraError::DimensionMismatch { expected: n, found: density.nrows() });
        }
        if linalg::max_abs(&(&density - density.adjoint())) > CERT_TOL {
            return Err(AlgebraError::InvalidState { reason: "density is not Hermitian".into() });
        }
        if (density.trace() - ONE).norm() > FAITHFUL_CUTOFF.max(CERT_TOL) {
            return Err(AlgebraError::InvalidState { reason: format!("density has trace {}", density.trace()) });
        }
        let min = linalg::herm_eig(&density).0[0];
        if min <= FAITHFUL_CUTOFF {
            return Err(AlgebraError::DegenerateState { min_eigenvalue: min });
        }
        let values = CVec::from_iterator(algebra.dim(), algebra.basis().iter().map(|b| (&density * b).trace()));
        let state = StateFunctional { density, values };
        let gram = state.gram(algebra);
        let gmin = linalg::herm_eig(&gram).0[0];
        if gmin <= FAITHFUL_CUTOFF {
            return Err(AlgebraError::DegenerateState { min_eigenvalue: gmin });
        }
        Ok(state)
    }

    /// Normalized trace of the ambient matrix algebra.
    pub fn normalized_trace(algebra: &MatrixStarAlgebra) -> Self {
        let n = algebra.ambient_dim();
        Self::new(algebra, CMat::identity(n, n) * c(1.0 / n as f64)).expect("trace is faithful")
    }

    pub fn density(&self) -> &CMat {
        &self.density
    }

    /// Values on the basis, so that `φ(x) = Σ values_k x_k`.
    pub fn values(&self) -> &CVec {
        &self.values
    }

    pub fn eval(&self, x: &CVec) -> C64 {
        self.values.dot(x)
    }

    /// `G[i,j] = φ(b_i* b_j)`.
    pub fn gram(&self, algebra: &MatrixStarAlgebra) -> CMat {
        let d = algebra.dim();
        CMat::from_fn(d, d, |i, j| {
            let bi = algebra.basis_vector(i);
            let bj = algebra.basis_vector(j);
            self.eval(&algebra.mul(&algebra.star(&bi), &bj))
        })
    }

    pub fn is_tracial(&self, algebra: &MatrixStarAlgebra) -> bool {
        let d = algebra.dim();
        (0..d).all(|i| {
            (0..d).all(|j| {
                let bi = algebra.basis_vector(i);
                let bj = algebra.basis_vector(j);
                (self.eval(&algebra.mul(&bi, &bj)) - self.eval(&algebra.mul(&bj, &bi))).norm() <= CERT_TOL
            })
        })
    }
}

/// GNS data of a faithful state in an orthonormal basis of `L²(A, φ)`.
#[derive(Debug, Clone)]
pub struct Gns {
    pub gram: CMat,
    /// Columns are coordinate vectors of an orthonormal basis.
    pub onb: CMat,
    /// Inverse of `onb`: maps coordinates of `x` to the orthonormal coordinates of `x̂`.
    pub to_onb: CMat,
    /// Left multiplication by each basis element in orthonormal coordinates.
    pub left: Vec<CMat>,
}

impl Gns {
    pub fn vector(&self, x: &CVec) -> CVec {
        &self.to_onb * x
    }

    pub fn pi(&self, x: &CVec) -> CMat {
        let d = self.left.len();
        let mut m = CMat::zeros(d, d);
        for k in 0..d {
            m += &self.left[k] * x[k];
        }
        m
    }
}

pub fn gns(algebra: &MatrixStarAlgebra, state: &StateFunctional) -> Result<Gns, AlgebraError> {
    let gram = state.gram(algebra);
    let (vals, vecs) = linalg::herm_eig(&gram);
    if vals[0] <= FAITHFUL_CUTOFF {
        return Err(AlgebraError::DegenerateState { min_eigenvalue: vals[0] });
    }
    let d = algebra.dim();
    let onb = CMat::from_fn(d, d, |r, k| vecs[(r, k)] / vals[k].sqrt());
    let to_onb = CMat::from_fn(d, d, |k, r| vecs[(r, k)].conj() * vals[k].sqrt());
    let left = (0..d).map(|k| &to_onb * algebra.left_matrix(&algebra.basis_vector(k)) * &onb).collect();
    Ok(Gns { gram, onb, to_onb, left })
}

/// A verified unital injective *-homomorphism `s: B → A` in coordinates.
#[derive(Debug, Clone)]
pub struct Embedding {
    pub source: Arc<MatrixStarAlgebra>,
    pub target: Arc<MatrixStarAlgebra>,
    map: CMat,
    inverse: CMat,
}

impl Embedding {
    pub fn new(source: Arc<MatrixStarAlgebra>, target: Arc<MatrixStarAlgebra>, map: CMat) -> Result<Self, AlgebraError> {
        let (db, da) = (source.dim(), target.dim());
        if map.nrows() != da || map.ncols() != db {
            return Err(AlgebraError::DimensionMismatch { expected: da * db, found: map.nrows() * map.ncols() });
        }
        let hom = |law, indices, residual| AlgebraError::NotHomomorphism { law, indices, residual };
        let r = (&map * source.unit() - target.unit()).norm();
        if r > CERT_TOL {
            return Err(hom("unital", vec![], r));
        }
        for i in 0..db {
            let bi = source.basis_vector(i);
            let si = &map * &bi;
            let lhs = target.star(&si);
            let rhs = &map * source.star(&bi);
            let r = scaled((&lhs - &rhs).norm(), rhs.norm());
            if r > CERT_TOL {
                return Err(hom("adjoint-preserving", vec![i], r));
            }
            for j in 0..db {
                let bj = source.basis_vector(j);
                let lhs = target.mul(&si, &(&map * &bj));
                let rhs = &map * source.mul(&bi, &bj);
                let r = scaled((&lhs - &rhs).norm(), rhs.norm());
                if r > CERT_TOL {
                    return Err(hom("multiplicative", vec![i, j], r));
                }
            }
        }
        let sv = linalg::singular_values(&map);
        if sv.len() < db || sv[db - 1] <= CERT_TOL * sv[0] {
            return Err(hom("injective", (0..db).collect(), sv.last().cloned().unwrap_or(0.0)));
        }
        let inverse = linalg::pinv(&map);
        Ok(Embedding { source, target, map, inverse })
    }

    /// Coordinate matrix (`dim A × dim B`).
    pub fn map(&self) -> &CMat {
        &self.map
    }

    pub fn apply(&self, b: &CVec) -> CVec {
        &self.map * b
    }

    /// Left inverse on the image.
    pub fn inverse(&self) -> &CMat {
        &self.inverse
    }
}

/// An embedding together with its certified state-preserving conditional expectation.
#[derive(Debug, Clone)]
pub struct EmbeddingWithExpectation {
    pub embedding: Embedding,
    expectation: CMat,
}

impl EmbeddingWithExpectation {
    /// Certifies a given expectation matrix against the conditional-expectation laws.
    pub fn certify(
        embedding: Embedding,
        expectation: CMat,
        state_a: &StateFunctional,
        state_b: &StateFunctional,
    ) -> Result<Self, AlgebraError> {
        let a = &embedding.target;
        let b = &embedding.source;
        let (da, db) = (a.dim(), b.dim());
        if expectation.nrows() != da || expectation.ncols() != da {
            return Err(AlgebraError::DimensionMismatch { expected: da, found: expectation.nrows() });
        }
        let fail = |law, indices, residual| AlgebraError::NoModularCompatibility { law, indices, residual };
        let e = &expectation;
        let r = linalg::max_abs(&(e * e - e));
        if r > CERT_TOL {
            return Err(fail("idempotent", vec![], r));
        }
        let r = (e * a.unit() - a.unit()).norm();
        if r > CERT_TOL {
            return Err(fail("unital", vec![], r));
        }
        let outside = (CMat::identity(da, da) - embedding.map() * embedding.inverse()) * e;
        let r = linalg::max_abs(&outside);
        if r > CERT_TOL {
            return Err(fail("range in subalgebra", vec![], r));
        }
        for k in 0..da {
            let x = a.basis_vector(k);
            let r = (e * a.star(&x) - a.star(&(e * &x))).norm();
            if r > CERT_TOL {
                return Err(fail("adjoint-preserving", vec![k], r));
            }
        }
        for i in 0..db {
            let s1 = embedding.apply(&b.basis_vector(i));
            for j in 0..db {
                let s2 = embedding.apply(&b.basis_vector(j));
                for k in 0..da {
                    let x = a.basis_vector(k);
                    let lhs = e * a.mul(&a.mul(&s1, &x), &s2);
                    let rhs = a.mul(&a.mul(&s1, &(e * &x)), &s2);
                    let r = scaled((&lhs - &rhs).norm(), rhs.norm());
                    if r > CERT_TOL {
                        return Err(fail("bimodule", vec![i, k, j], r));
                    }
                }
            }
        }
        for k in 0..da {
            let x = a.basis_vector(k);
            let lhs = state_a.eval(&x);
            let rhs = state_b.eval(&(embedding.inverse() * (e * &x)));
            let r = (lhs - rhs).norm();
            if r > CERT_TOL {
                return Err(fail("state compatibility", vec![k], r));
            }
        }
        Ok(EmbeddingWithExpectation { embedding, expectation })
    }

    /// Largest residual of each conditional-expectation law, by law name.
    pub fn law_residuals(&self, state_a: &StateFunctional, state_b: &StateFunctional) -> Vec<(&'static str, f64)> {
        let emb = &self.embedding;
        let (a, b) = (&emb.target, &emb.source);
        let (da, db) = (a.dim(), b.dim());
        let e = &self.expectation;
        let idem = linalg::max_abs(&(e * e - e));
        let range = linalg::max_abs(&((CMat::identity(da, da) - emb.map() * emb.inverse()) * e));
        let mut adjoint: f64 = 0.0;
        let mut state: f64 = 0.0;
        for k in 0..da {
            let x = a.basis_vector(k);
            adjoint = adjoint.max((e * a.star(&x) - a.star(&(e * &x))).norm());
            state = state.max((state_a.eval(&x) - state_b.eval(&(emb.inverse() * (e * &x)))).norm());
        }
        let mut bimodule: f64 = 0.0;
        for i in 0..db {
            let s1 = emb.apply(&b.basis_vector(i));
            for j in 0..db {
                let s2 = emb.apply(&b.basis_vector(j));
                for k in 0..da {
                    let x = a.basis_vector(k);
                    let lhs = e * a.mul(&a.mul(&s1, &x), &s2);
                    let rhs = a.mul(&a.mul(&s1, &(e * &x)), &s2);
                    bimodule = bimodule.max(scaled((&lhs - &rhs).norm(), rhs.norm()));
                }
            }
        }
        vec![
            ("idempotent", idem),
            ("unital", (e * a.unit() - a.unit()).norm()),
            ("range in subalgebra", range),
            ("adjoint-preserving", adjoint),
            ("bimodule", bimodule),
            ("state compatibility", state),
        ]
    }

    pub fn expectation(&self) -> &CMat {
        &self.expectation
    }

    pub fn expect(&self, x: &CVec) -> CVec {
        &self.expectation * x
    }

    /// `s⁻¹∘E` as a matrix `dim B × dim A`.
    pub fn to_source(&self) -> CMat {
        self.embedding.inverse() * &self.expectation
    }
}

/// Computes the GNS-orthogonal projection onto `s(B)` and certifies it.
pub fn conditional_expectation(
    embedding: Embedding,
    state_a: &StateFunctional,
    state_b: &StateFunctional,
) -> Result<EmbeddingWithExpectation, AlgebraError> {
    let b = &embedding.source;
    for i in 0..b.dim() {
        let bi = b.basis_vector(i);
        let r = (state_a.eval(&embedding.apply(&bi)) - state_b.eval(&bi)).norm();
        if r > CERT_TOL {
            return Err(AlgebraError::NotStatePreserving { index: i, residual: r });
        }
    }
    let g = state_a.gram(&embedding.target);
    let s = embedding.map();
    let inner = s.adjoint() * &g * s;
    let inv = inner.try_inverse().ok_or(AlgebraError::DegenerateState { min_eigenvalue: 0.0 })?;
    let e = s * inv * s.adjoint() * &g;
    EmbeddingWithExpectation::certify(embedding, e, state_a, state_b)
}

/// A one-dimensional *-representation given by its values on the basis.
#[derive(Debug, Clone)]
pub struct Counit {
    values: CVec,
}

impl Counit {
    pub fn new(algebra: &MatrixStarAlgebra, values: CVec) -> Result<Self, AlgebraError> {
        let d = algebra.dim();
        if values.len() != d {
            return Err(AlgebraError::DimensionMismatch { expected: d, found: values.len() });
        }
        let fail = |law, indices, residual| AlgebraError::NotCounit { law, indices, residual };
        let eps = |x: &CVec| values.dot(x);
        let r = (eps(algebra.unit()) - ONE).norm();
        if r > CERT_TOL {
            return Err(fail("unital", vec![], r));
        }
        for i in 0..d {
            let bi = algebra.basis_vector(i);
            let r = (eps(&algebra.star(&bi)) - eps(&bi).conj()).norm();
            if r > CERT_TOL {
                return Err(fail("adjoint-preserving", vec![i], r));
            }
            for j in 0..d {
                let bj = algebra.basis_vector(j);
                let r = (eps(&algebra.mul(&bi, &bj)) - eps(&bi) * eps(&bj)).norm();
                if r > CERT_TOL {
                    return Err(fail("multiplicative", vec![i, j], r));
                }
            }
        }
        Ok(Counit { values })
    }

    pub fn values(&self) -> &CVec {
        &self.values
    }

    pub fn eval(&self, x: &CVec) -> C64 {
        self.values.dot(x)
    }
}

/// Modular operator and conjugation of a faithful state, in the orthonormal GNS basis.
#[derive(Debug, Clone)]
pub struct ModularData {
    pub gns_gram: CMat,
    /// `∇` in orthonormal coordinates.
    pub modular_operator: CMat,
    /// `J(v) = modular_conjugation · conj(v)`.
    pub modular_conjugation: CMat,
    /// `S(v) = tomita · conj(v)`, where `S(x̂) = (x*)^`.
    pub tomita: CMat,
    gns: Gns,
}

impl ModularData {
    /// `∇` acting on algebra coordinates: `x̂ ↦ ∇x̂` read back as an element.
    pub fn modular_on_coords(&self) -> CMat {
        &self.gns.onb * &self.modular_operator * &self.gns.to_onb
    }

    /// Largest residual among `J² = Id` and `S = J∇^{1/2}`.
    pub fn self_check(&self) -> f64 {
        let j = &self.modular_conjugation;
        let d = j.nrows();
        let r1 = linalg::max_abs(&(j * conj_mat(j) - CMat::identity(d, d)));
        let half = linalg::herm_fn(&self.modular_operator, |v| v.max(0.0).sqrt());
        let r2 = linalg::max_abs(&(j * conj_mat(&half) - &self.tomita));
        r1.max(r2)
    }

    pub fn gns(&self) -> &Gns {
        &self.gns
    }
}

pub fn modular_data(algebra: &MatrixStarAlgebra, state: &StateFunctional) -> Result<ModularData, AlgebraError> {
    let g = gns(algebra, state)?;
    let d = algebra.dim();
    let mut tomita = CMat::zeros(d, d);
    for a in 0..d {
        let v = g.onb.column(a).into_owned();
        tomita.set_column(a, &(&g.to_onb * algebra.star_matrix() * conj_vec(&v)));
    }
    let nabla = conj_mat(&(tomita.adjoint() * &tomita));
    let nabla = (&nabla + nabla.adjoint()) * c(0.5);
    let min = linalg::herm_eig(&nabla).0[0];
    if min <= FAITHFUL_CUTOFF {
        return Err(AlgebraError::DegenerateState { min_eigenvalue: min });
    }
    let inv_half = linalg::herm_fn(&nabla, |v| 1.0 / v.sqrt());
    let j = &tomita * conj_mat(&inv_half);
    Ok(ModularData { gns_gram: g.gram.clone(), modular_operator: nabla, modular_conjugation: j, tomita, gns: g })
}

/// Group algebra of a finite group in its left-regular representation.
#[derive(Debug, Clone)]
pub struct GroupAlgebra {
    pub algebra: MatrixStarAlgebra,
    pub state: StateFunctional,
    pub counit: Counit,
    pub identity: usize,
    pub table: Vec<Vec<usize>>,
}

impl GroupAlgebra {
    pub fn order(&self) -> usize {
        self.table.len()
    }

    pub fn inverse(&self, g: usize) -> usize {
        (0..self.order()).find(|&h| self.table[g][h] == self.identity).expect("validated group")
    }
}

pub fn validate_group_table(table: &[Vec<usize>]) -> Result<usize, AlgebraError> {
    let m = table.len();
    let bad = |law, indices| AlgebraError::NonGroupTable { law, indices };
    if m == 0 {
        return Err(bad("nonempty", vec![]));
    }
    for (g, row) in table.iter().enumerate() {
        if row.len() != m {
            return Err(bad("square table", vec![g]));
        }
        if let Some(h) = row.iter().position(|&x| x >= m) {
            return Err(bad("closure", vec![g, h]));
        }
    }
    for a in 0..m {
        for b in 0..m {
            for cc in 0..m {
                if table[table[a][b]][cc] != table[a][table[b][cc]] {
                    return Err(bad("associativity", vec![a, b, cc]));
                }
            }
        }
    }
    let identity = (0..m).find(|&e| (0..m).all(|g| table[e][g] == g && table[g][e] == g)).ok_or_else(|| bad("identity", vec![]))?;
    for g in 0..m {
        if !(0..m).any(|h| table[g][h] == identity && table[h][g] == identity) {
            return Err(bad("inverse", vec![g]));
        }
    }
    Ok(identity)
}

pub fn build_group_algebra(label: impl Into<String>, table: &[Vec<usize>]) -> Result<GroupAlgebra, AlgebraError> {
    let identity = validate_group_table(table)?;
    let m = table.len();
    let basis = (0..m)
        .map(|g| {
            let mut p = CMat::zeros(m, m);
            for h in 0..m {
                p[(table[g][h], h)] = ONE;
            }
            p
        })
        .collect();
    let algebra = MatrixStarAlgebra::new(label, basis)?;
    let state = StateFunctional::normalized_trace(&algebra);
    let counit = Counit::new(&algebra, CVec::from_element(m, ONE))?;
    Ok(GroupAlgebra { algebra, state, counit, identity, table: table.to_vec() })
}

/// Multiplication table of the cyclic group of order `m`.
pub fn cyclic_table(m: usize) -> Vec<Vec<usize>> {
    (0..m).map(|a| (0..m).map(|b| (a + b) % m).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag_density(d: &[f64]) -> CMat {
        CMat::from_diagonal(&CVec::from_iterator(d.len(), d.iter().map(|&x| c(x))))
    }

    #[test]
    fn trivial_and_small_groups() {
        let g1 = build_group_algebra("1", &cyclic_table(1)).unwrap();
        assert_eq!(g1.algebra.dim(), 1);
        assert!((g1.state.eval(g1.algebra.unit()) - ONE).norm() < 1e-12);
        let g2 = build_group_algebra("Z2", &cyclic_table(2)).unwrap();
        assert!(g2.state.eval(&g2.algebra.basis_vector(1)).norm() < 1e-12);
        assert!((g2.counit.eval(&g2.algebra.basis_vector(1)) - ONE).norm() < 1e-12);
        let g4 = build_group_algebra("Z4", &cyclic_table(4)).unwrap();
        for k in 0..4 {
            let expected = if k == 0 { 1.0 } else { 0.0 };
            assert!((g4.state.eval(&g4.algebra.basis_vector(k)) - c(expected)).norm() < 1e-12);
        }
    }

    #[test]
    fn non_associative_table_names_triple() {
        let table = vec![vec![0, 1, 2], vec![1, 0, 0], vec![2, 2, 0]];
        match build_group_algebra("bad", &table) {
            Err(AlgebraError::NonGroupTable { law, indices }) => {
                assert_eq!(law, "associativity");
                assert_eq!(indices.len(), 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn trace_expectation_onto_scalars() {
        let m2 = Arc::new(MatrixStarAlgebra::full("M2", 2));
        let cc = Arc::new(MatrixStarAlgebra::scalars("C"));
        let tr = StateFunctional::normalized_trace(&m2);
        let one = StateFunctional::normalized_trace(&cc);
        let emb = Embedding::new(cc, m2.clone(), CMat::from_column_slice(4, 1, m2.unit().as_slice())).unwrap();
        let e = conditional_expectation(emb, &tr, &one).unwrap();
        let x = CVec::from_vec(vec![c(1.0), c(2.0), c(3.0), c(5.0)]);
        let ex = e.expect(&x);
        let expected = m2.unit() * c(3.0);
        assert!((ex - expected).norm() < 1e-12);
    }

    #[test]
    fn z2_inside_z4_expectation_matches_brute_force() {
        let z4 = build_group_algebra("Z4", &cyclic_table(4)).unwrap();
        let z2 = build_group_algebra("Z2", &cyclic_table(2)).unwrap();
        let map = CMat::from_fn(4, 2, |r, k| if r == 2 * k { ONE } else { ZERO });
        let emb = Embedding::new(Arc::new(z2.algebra.clone()), Arc::new(z4.algebra.clone()), map).unwrap();
        let e = conditional_expectation(emb, &z4.state, &z2.state).unwrap();
        // brute force: project each λ_k onto span{λ_0, λ_2} using the ambient trace inner product
        for k in 0..4 {
            let lk = &z4.algebra.basis()[k];
            let mut proj = CMat::zeros(4, 4);
            for j in [0usize, 2] {
                let lj = &z4.algebra.basis()[j];
                proj += lj * ((lj.adjoint() * lk).trace() / c(4.0));
            }
            let got = z4.algebra.element(&e.expect(&z4.algebra.basis_vector(k)));
            assert!((got - proj).norm() < 1e-12, "k = {k}");
        }
    }

    #[test]
    fn gns_gram_of_m2_matches_direct_evaluation() {
        let m2 = MatrixStarAlgebra::full("M2", 2);
        let rho = diag_density(&[2.0 / 3.0, 1.0 / 3.0]);
        let st = StateFunctional::new(&m2, rho.clone()).unwrap();
        let g = gns(&m2, &st).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let direct = (&rho * m2.basis()[i].adjoint() * &m2.basis()[j]).trace();
                assert!((g.gram[(i, j)] - direct).norm() < 1e-12);
            }
        }
        let id = g.onb.adjoint() * &g.gram * &g.onb;
        assert!((id - CMat::identity(4, 4)).norm() < 1e-10);
        for i in 0..4 {
            for j in 0..4 {
                let lhs = &g.left[i] * g.vector(&m2.basis_vector(j));
                let rhs = g.vector(&m2.mul(&m2.basis_vector(i), &m2.basis_vector(j)));
                assert!((lhs - rhs).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn modular_operator_of_m2_matches_density_conjugation() {
        let m2 = MatrixStarAlgebra::full("M2", 2);
        let rho = diag_density(&[2.0 / 3.0, 1.0 / 3.0]);
        let st = StateFunctional::new(&m2, rho.clone()).unwrap();
        let md = modular_data(&m2, &st).unwrap();
        let rho_inv = rho.clone().try_inverse().unwrap();
        let nab = md.modular_on_coords();
        for k in 0..4 {
            let x = &m2.basis()[k];
            let expected = m2.coords(&(&rho * x * &rho_inv));
            assert!((&nab * m2.basis_vector(k) - expected).norm() < 1e-10);
        }
        let mut eig = linalg::herm_eig(&md.modular_operator).0;
        eig.sort_by(|a, b| a.total_cmp(b));
        for (got, want) in eig.iter().zip([0.5, 1.0, 1.0, 2.0]) {
            assert!((got - want).abs() < 1e-10);
        }
        assert!(md.self_check() < 1e-9);
    }

    #[test]
    fn tracial_states_have_trivial_modular_operator() {
        let z4 = build_group_algebra("Z4", &cyclic_table(4)).unwrap();
        let md = modular_data(&z4.algebra, &z4.state).unwrap();
        assert!((md.modular_operator.clone() - CMat::identity(4, 4)).norm() < 1e-10);
        assert!(md.self_check() < 1e-9);
    }

    #[test]
    fn non_invariant_subalgebra_has_no_expectation() {
        let m2 = Arc::new(MatrixStarAlgebra::full("M2", 2));
        let rho = diag_density(&[2.0 / 3.0, 1.0 / 3.0]);
        let st = StateFunctional::new(&m2, rho).unwrap();
        // C*(Z/2) sitting inside M2 as span{1, σ_x}; not invariant under the modular group
        let z2 = build_group_algebra("Z2", &cyclic_table(2)).unwrap();
        let map = CMat::from_fn(4, 2, |r, k| match (r, k) {
            (0, 0) | (3, 0) | (1, 1) | (2, 1) => ONE,
            _ => ZERO,
        });
        let emb = Embedding::new(Arc::new(z2.algebra.clone()), m2.clone(), map).unwrap();
        let err = conditional_expectation(emb, &st, &z2.state).unwrap_err();
        assert!(matches!(err, AlgebraError::NotStatePreserving { .. } | AlgebraError::NoModularCompatibility { .. }));
    }
}
