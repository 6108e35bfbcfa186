//! Small complex linear-algebra helpers shared by the solvers.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const J: Complex64 = Complex64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Squared Frobenius norm.
pub fn fro2(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// Real inner product `Re tr(Xᴴ Y)`.
pub fn inner(x: &CMat, y: &CMat) -> f64 {
    x.iter().zip(y.iter()).map(|(a, b)| a.re * b.re + a.im * b.im).sum()
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Largest absolute deviation of `m` from its conjugate transpose.
pub fn hermitian_defect(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn symmetrize(m: &CMat) -> CMat {
    (m + m.adjoint()) * c(0.5, 0.0)
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues sorted descending.
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let eig = symmetrize(m).symmetric_eigen();
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

/// Hermitian PSD square root `V diag(√max(λ,0)) Vᴴ`; tolerates rank deficiency.
pub fn psd_sqrt(m: &CMat) -> CMat {
    let (values, vectors) = hermitian_eigen(m);
    let mut scaled = vectors.clone();
    for (j, lambda) in values.iter().enumerate() {
        let s = lambda.max(0.0).sqrt();
        scaled.column_mut(j).scale_mut(s);
    }
    scaled * vectors.adjoint()
}

/// Rescales every row of `m` to Euclidean norm `target`.
pub fn normalize_rows(m: &CMat, target: f64) -> Result<CMat> {
    let mut out = m.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        let norm = row.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Degenerate(format!("row {i} has norm {norm}, cannot normalize")));
        }
        row.scale_mut(target / norm);
    }
    Ok(out)
}

/// Column-major vectorization.
pub fn vec_of(m: &CMat) -> CVec {
    CVec::from_iterator(m.len(), m.iter().copied())
}

/// Inverse of [`vec_of`].
pub fn unvec(v: &CVec, rows: usize, cols: usize) -> CMat {
    CMat::from_iterator(rows, cols, v.iter().copied())
}

pub fn all_finite(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psd_sqrt_of_rank_one() {
        let v = CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0)]);
        let r = &v * v.adjoint();
        let q = psd_sqrt(&r);
        assert!(fro2(&(&q * q.adjoint() - &r)) < 1e-20);
    }

    #[test]
    fn vec_roundtrip_is_column_major() {
        let m = CMat::from_fn(2, 3, |i, j| c((i + 2 * j) as f64, 0.0));
        let v = vec_of(&m);
        assert_eq!(v[1], c(1.0, 0.0));
        assert_eq!(v[2], c(2.0, 0.0));
        assert_eq!(unvec(&v, 2, 3), m);
    }

    #[test]
    fn zero_row_cannot_be_normalized() {
        let m = CMat::zeros(2, 2);
        assert!(matches!(normalize_rows(&m, 1.0), Err(Error::Degenerate(_))));
    }
}
