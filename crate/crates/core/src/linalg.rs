//! Small dense complex linear-algebra helpers on top of nalgebra.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use num_complex::Complex;

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const J: C64 = C64 { re: 0.0, im: 1.0 };

#[inline]
pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// `(M + M^H) / 2`.
pub fn hermitian_part(m: &CMat) -> CMat {
    let mut h = m.clone();
    h += m.adjoint();
    h *= c(0.5);
    h
}

/// Replace `m` with its Hermitian part in place.
pub fn hermitize(m: &mut CMat) {
    let n = m.nrows();
    for i in 0..n {
        m[(i, i)].im = 0.0;
        for j in (i + 1)..n {
            let v = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = v;
            m[(j, i)] = v.conj();
        }
    }
}

pub fn outer(u: &CVec, v: &CVec) -> CMat {
    u * v.adjoint()
}

/// `Re(h^H W h)`.
pub fn quad_form(h: &CVec, w: &CMat) -> f64 {
    h.dotc(&(w * h)).re
}

/// `Re Tr(A B)` without forming the product.
pub fn re_trace_product(a: &CMat, b: &CMat) -> f64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            let x = a[(i, k)];
            let y = b[(k, i)];
            acc += x.re * y.re - x.im * y.im;
        }
    }
    acc
}

pub fn trace_re(m: &CMat) -> f64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)].re).sum()
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues sorted in
/// descending order with eigenvectors as matching columns.
pub fn hermitian_eig(m: &CMat) -> (Vec<f64>, CMat) {
    let eig = SymmetricEigen::new(hermitian_part(m));
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Eigenvalues of a Hermitian matrix, descending.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let mut v: Vec<f64> = hermitian_part(m).symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

pub fn cholesky(m: &CMat) -> Option<Cholesky<C64, Dyn>> {
    Cholesky::new(m.clone())
}

/// Largest `alpha <= cap` such that `X + alpha * dX` stays positive definite,
/// given the Cholesky factor of `X`.
pub fn max_psd_step(chol_x: &Cholesky<C64, Dyn>, dx: &CMat, cap: f64) -> f64 {
    let l = chol_x.l();
    // L^{-1} dX L^{-H}
    let mut t = dx.clone();
    if !l.solve_lower_triangular_mut(&mut t) {
        return 0.0;
    }
    let mut t = t.adjoint();
    if !l.solve_lower_triangular_mut(&mut t) {
        return 0.0;
    }
    hermitize(&mut t);
    let lmin = t.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
    if lmin >= 0.0 {
        cap
    } else {
        (-1.0 / lmin).min(cap)
    }
}

/// Hermitian positive-definite inverse via Cholesky.
pub fn hpd_inverse(m: &CMat) -> Option<CMat> {
    let mut inv = cholesky(m)?.inverse();
    hermitize(&mut inv);
    Some(inv)
}

/// Real symmetric matrix with the given real entries.
pub fn real_to_complex(m: &DMatrix<f64>) -> CMat {
    m.map(c)
}

pub fn column(v: &CVec) -> CMat {
    CMat::from_column_slice(v.len(), 1, v.as_slice())
}

/// Embed an `n`-vector as block `block` of an `n * blocks` vector.
pub fn embed_block(v: &CVec, block: usize, blocks: usize) -> CVec {
    let n = v.len();
    let mut out = CVec::zeros(n * blocks);
    out.rows_mut(block * n, n).copy_from(v);
    out
}

pub fn min_eigenvalue(m: &CMat) -> f64 {
    hermitian_part(m)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Real symmetric part as an f64 matrix.
pub fn real_part(m: &CMat) -> DMatrix<f64> {
    m.map(|z| z.re)
}

pub fn vec_norm(v: &DVector<f64>) -> f64 {
    v.norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermitian_eig_orders_and_reconstructs() {
        let u = CVec::from_vec(vec![c(1.0), J, c(0.5)]);
        let v = CVec::from_vec(vec![J, c(2.0), c(-1.0)]);
        let m = outer(&u, &u) * c(3.0) + outer(&v, &v);
        let (vals, vecs) = hermitian_eig(&m);
        assert!(vals[0] >= vals[1] && vals[1] >= vals[2]);
        assert!(vals[2].abs() < 1e-10);
        let mut rec = CMat::zeros(3, 3);
        for i in 0..3 {
            let col = vecs.column(i).into_owned();
            rec += outer(&col, &col) * c(vals[i]);
        }
        assert!(frobenius(&(rec - m)) < 1e-10);
    }

    #[test]
    fn psd_step_hits_boundary() {
        let x = CMat::identity(3, 3);
        let dx = CMat::from_diagonal(&CVec::from_vec(vec![c(-2.0), c(1.0), c(0.0)]));
        let chol = cholesky(&x).unwrap();
        let a = max_psd_step(&chol, &dx, 10.0);
        assert!((a - 0.5).abs() < 1e-12);
        assert!((max_psd_step(&chol, &(-&dx), 10.0) - 1.0).abs() < 1e-12);
        assert_eq!(max_psd_step(&chol, &dx.map(|z| c(z.norm())), 10.0), 10.0);
    }

    #[test]
    fn trace_product_matches_dense() {
        let a = CMat::from_fn(3, 3, |i, j| C64::new(i as f64 + 1.0, j as f64 - 1.0));
        let b = CMat::from_fn(3, 3, |i, j| C64::new((i * j) as f64, 0.5 * i as f64));
        assert!((re_trace_product(&a, &b) - (&a * &b).trace().re).abs() < 1e-12);
    }
}
