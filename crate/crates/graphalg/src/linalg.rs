//! Dense complex helpers shared by the algebraic modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn herm_eig(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), CMat::zeros(0, 0));
    }
    let h = (m + m.adjoint()) * c(0.5);
    let eig = h.clone().symmetric_eigen();
    let (mut raw_vals, mut raw_vecs): (Vec<f64>, CMat) = (eig.eigenvalues.iter().cloned().collect(), eig.eigenvectors);
    // The tridiagonal QR occasionally returns eigenvectors that do not
    // reconstruct the matrix after deflation; the Schur form is slower but sound.
    let scale = max_abs(&h).max(1.0);
    let recon = &raw_vecs * CMat::from_diagonal(&CVec::from_iterator(n, raw_vals.iter().map(|&v| c(v)))) * raw_vecs.adjoint();
    if max_abs(&(recon - &h)) > 1e-10 * scale {
        let (q, t) = h.schur().unpack();
        raw_vals = t.diagonal().iter().map(|z| z.re).collect();
        raw_vecs = q;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| raw_vals[a].total_cmp(&raw_vals[b]));
    let vals = order.iter().map(|&i| raw_vals[i]).collect();
    let vecs = CMat::from_fn(n, n, |r, k| raw_vecs[(r, order[k])]);
    (vals, vecs)
}

/// Columns `C` with `C* G C = I` spanning the range of a PSD Gram matrix.
///
/// Eigenvalues below `rel_cut` times the largest one are treated as null.
pub fn orthonormalizer(gram: &CMat, rel_cut: f64) -> CMat {
    let n = gram.nrows();
    let (vals, vecs) = herm_eig(gram);
    let top = vals.iter().cloned().fold(0.0_f64, f64::max);
    if top <= 0.0 {
        return CMat::zeros(n, 0);
    }
    let keep: Vec<usize> = (0..n).filter(|&i| vals[i] > rel_cut * top).collect();
    CMat::from_fn(n, keep.len(), |r, k| vecs[(r, keep[k])] / vals[keep[k]].sqrt())
}

pub fn pinv(m: &CMat) -> CMat {
    if m.nrows() == 0 || m.ncols() == 0 {
        return CMat::zeros(m.ncols(), m.nrows());
    }
    m.clone().pseudo_inverse(1e-12).expect("pseudo-inverse of a nonempty matrix")
}

pub fn spectral_norm(m: &CMat) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.iter().cloned().fold(0.0, f64::max)
}

pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().cloned().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn numerical_rank(m: &CMat, tol: f64) -> usize {
    singular_values(m).into_iter().filter(|&s| s > tol).count()
}

/// Orthonormal basis (columns) of the column span of `m`.
pub fn column_basis(m: &CMat, tol: f64) -> CMat {
    let g = m.adjoint() * m;
    let top = herm_eig(&g).0.last().cloned().unwrap_or(0.0);
    if top <= tol * tol {
        return CMat::zeros(m.nrows(), 0);
    }
    m * orthonormalizer(&g, (tol * tol / top).max(1e-24))
}

/// Applies a real function to a Hermitian matrix through its spectrum.
pub fn herm_fn(m: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let (vals, vecs) = herm_eig(m);
    let d = CMat::from_diagonal(&CVec::from_iterator(vals.len(), vals.iter().map(|&v| c(f(v)))));
    &vecs * d * vecs.adjoint()
}

/// Kronecker product with the right factor varying fastest.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn kron_vec(a: &CVec, b: &CVec) -> CVec {
    let mut out = CVec::zeros(a.len() * b.len());
    for i in 0..a.len() {
        for j in 0..b.len() {
            out[i * b.len() + j] = a[i] * b[j];
        }
    }
    out
}

/// Matrix product through real kernels, which are much faster than the
/// generic complex one for anything but tiny matrices.
pub fn mul(a: &CMat, b: &CMat) -> CMat {
    assert_eq!(a.ncols(), b.nrows(), "inner dimensions differ");
    if a.nrows() * a.ncols() * b.ncols() < 32_768 {
        return a * b;
    }
    let (ar, ai) = (a.map(|z| z.re), a.map(|z| z.im));
    let (br, bi) = (b.map(|z| z.re), b.map(|z| z.im));
    let re = &ar * &br - &ai * &bi;
    let im = &ar * &bi + &ai * &br;
    re.zip_map(&im, C64::new)
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn conj_mat(m: &CMat) -> CMat {
    m.map(|z| z.conj())
}

pub fn conj_vec(v: &CVec) -> CVec {
    v.map(|z| z.conj())
}

/// Restriction of `m` to the given row and column index sets.
pub fn submatrix(m: &CMat, rows: &[usize], cols: &[usize]) -> CMat {
    CMat::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

pub fn columns(m: &CMat, cols: &[usize]) -> CMat {
    CMat::from_fn(m.nrows(), cols.len(), |i, j| m[(i, cols[j])])
}

pub fn unit_vector(n: usize, i: usize) -> CVec {
    let mut v = CVec::zeros(n);
    v[i] = ONE;
    v
}
