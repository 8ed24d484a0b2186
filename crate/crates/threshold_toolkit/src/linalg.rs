//! Dense complex linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;
pub type RMat = DMatrix<f64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

#[inline]
pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn to_complex(a: &RMat) -> CMat {
    a.map(c)
}

/// (A + A*)/2
pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()).scale(0.5)
}

/// (A - A*)/(2i), the Hermitian "imaginary part" of a matrix.
pub fn imaginary_part(a: &CMat) -> CMat {
    (a - a.adjoint()) * C64::new(0.0, -0.5)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn eigvals_hermitian(a: &CMat) -> Vec<f64> {
    let h = hermitian_part(a);
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    ev
}

pub fn min_eig_hermitian(a: &CMat) -> f64 {
    eigvals_hermitian(a).first().copied().unwrap_or(0.0)
}

/// Eigen-decomposition of a Hermitian matrix with ascending eigenvalues.
pub fn eigh(a: &CMat) -> (Vec<f64>, CMat) {
    let h = hermitian_part(a);
    let eig = h.symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = CMat::zeros(n, n);
    for (k, &i) in idx.iter().enumerate() {
        vecs.set_column(k, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

pub struct Svd {
    pub u: CMat,
    /// Descending.
    pub s: Vec<f64>,
    pub v: CMat,
}

/// Thin SVD through faer; nalgebra's complex SVD can return wrong factors
/// for exactly rank-deficient Hermitian input.
pub fn svd(a: &CMat) -> Result<Svd> {
    let (m, n) = a.shape();
    let k = m.min(n);
    if k == 0 {
        return Ok(Svd { u: CMat::zeros(m, 0), s: vec![], v: CMat::zeros(n, 0) });
    }
    let fa = faer::Mat::<C64>::from_fn(m, n, |i, j| a[(i, j)]);
    let dec = fa.thin_svd().map_err(|_| Error::numerical("SVD did not converge"))?;
    let (fu, fs, fv) = (dec.U(), dec.S().column_vector(), dec.V());
    let mut idx: Vec<usize> = (0..k).collect();
    idx.sort_by(|&i, &j| fs[j].re.total_cmp(&fs[i].re));
    let u = CMat::from_fn(m, k, |i, col| fu[(i, idx[col])]);
    let v = CMat::from_fn(n, k, |i, col| fv[(i, idx[col])]);
    let s = idx.iter().map(|&i| fs[i].re).collect();
    Ok(Svd { u, s, v })
}

/// Real thin SVD (U, σ descending, V).
pub fn real_svd(a: &RMat) -> Result<(RMat, Vec<f64>, RMat)> {
    let (m, n) = a.shape();
    let k = m.min(n);
    if k == 0 {
        return Ok((RMat::zeros(m, 0), vec![], RMat::zeros(n, 0)));
    }
    let fa = faer::Mat::<f64>::from_fn(m, n, |i, j| a[(i, j)]);
    let dec = fa.thin_svd().map_err(|_| Error::numerical("SVD did not converge"))?;
    let (fu, fs, fv) = (dec.U(), dec.S().column_vector(), dec.V());
    let mut idx: Vec<usize> = (0..k).collect();
    idx.sort_by(|&i, &j| fs[j].total_cmp(&fs[i]));
    let u = RMat::from_fn(m, k, |i, col| fu[(i, idx[col])]);
    let v = RMat::from_fn(n, k, |i, col| fv[(i, idx[col])]);
    Ok((u, idx.iter().map(|&i| fs[i]).collect(), v))
}

pub fn singular_values(a: &CMat) -> Result<Vec<f64>> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(vec![]);
    }
    let fa = faer::Mat::<C64>::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)]);
    let mut s: Vec<f64> = fa
        .singular_values()
        .map_err(|_| Error::numerical("SVD did not converge"))?
        .into_iter()
        .collect();
    s.sort_by(|x, y| y.total_cmp(x));
    Ok(s)
}

pub fn spectral_norm(a: &CMat) -> f64 {
    singular_values(a).ok().and_then(|s| s.first().copied()).unwrap_or(f64::NAN)
}

/// Right null space of a square or tall matrix: singular values at or below
/// `rel_cut * sigma_max` count as zero.
pub struct NullSpace {
    pub basis: CMat,
    pub singular_values: Vec<f64>,
    pub cutoff: f64,
}

pub fn null_space(a: &CMat, rel_cut: f64) -> Result<NullSpace> {
    let d = svd(a)?;
    let smax = d.s.first().copied().unwrap_or(0.0);
    let cutoff = rel_cut * smax;
    let n = a.ncols();
    let mut cols = Vec::new();
    for (k, &sv) in d.s.iter().enumerate() {
        if sv <= cutoff {
            cols.push(d.v.column(k).into_owned());
        }
    }
    // Columns beyond min(m, n) are null directions as well.
    if d.v.ncols() < n {
        let comp = orthonormal_complement(&d.v);
        for k in 0..comp.ncols() {
            cols.push(comp.column(k).into_owned());
        }
    }
    let basis = if cols.is_empty() { CMat::zeros(n, 0) } else { CMat::from_columns(&cols) };
    Ok(NullSpace { basis, singular_values: d.s, cutoff })
}

/// Orthonormal basis of the column space, with singular values above the
/// relative cutoff.
pub fn range_basis(a: &CMat, rel_cut: f64) -> Result<CMat> {
    let d = svd(a)?;
    let smax = d.s.first().copied().unwrap_or(0.0);
    let r = d.s.iter().filter(|&&s| s > rel_cut * smax).count();
    Ok(d.u.columns(0, r).into_owned())
}

/// Orthonormal basis of the orthogonal complement of the columns of `q`
/// (assumed orthonormal).
pub fn orthonormal_complement(q: &CMat) -> CMat {
    let n = q.nrows();
    let p = CMat::identity(n, n) - q * q.adjoint();
    range_basis(&p, 1e-8).unwrap_or_else(|_| CMat::zeros(n, 0))
}

pub fn rank(a: &CMat, rel_cut: f64) -> Result<usize> {
    let s = singular_values(a)?;
    let smax = s.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return Ok(0);
    }
    Ok(s.iter().filter(|&&x| x > rel_cut * smax).count())
}

/// Moore-Penrose pseudo-inverse with relative singular-value cutoff.
pub fn pinv(a: &CMat, rel_cut: f64) -> Result<CMat> {
    let d = svd(a)?;
    let smax = d.s.first().copied().unwrap_or(0.0);
    let mut out = CMat::zeros(a.ncols(), a.nrows());
    for (k, &sv) in d.s.iter().enumerate() {
        if sv > rel_cut * smax {
            out += d.v.column(k) * d.u.column(k).adjoint() * c(1.0 / sv);
        }
    }
    Ok(out)
}

pub fn inverse(a: &CMat) -> Result<CMat> {
    a.clone().try_inverse().ok_or_else(|| Error::numerical("singular matrix"))
}

pub fn solve(a: &CMat, b: &CMat) -> Result<CMat> {
    a.clone().lu().solve(b).ok_or_else(|| Error::numerical("singular linear system"))
}

pub fn solve_vec(a: &CMat, b: &CVec) -> Result<CVec> {
    a.clone().lu().solve(b).ok_or_else(|| Error::numerical("singular linear system"))
}

/// 2-norm condition number.
pub fn condition_number(a: &CMat) -> Result<f64> {
    let s = singular_values(a)?;
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => Ok(hi / lo),
        _ => Ok(f64::INFINITY),
    }
}

/// A^{-1/2} for a Hermitian positive definite matrix.
pub fn inv_sqrt_hermitian(a: &CMat) -> Result<CMat> {
    let (vals, vecs) = eigh(a);
    if vals.iter().any(|&v| v <= 0.0) {
        return Err(Error::numerical("matrix is not positive definite"));
    }
    let d = CMat::from_diagonal(&CVec::from_iterator(vals.len(), vals.iter().map(|v| c(v.sqrt().recip()))));
    Ok(&vecs * d * vecs.adjoint())
}

/// Sign of the determinant of a real square matrix (0 when singular).
pub fn det_sign(a: &RMat) -> f64 {
    let lu = a.clone().lu();
    let mut sign = lu.p().determinant::<f64>();
    let u = lu.u();
    for k in 0..u.nrows() {
        let d = u[(k, k)];
        if d == 0.0 {
            return 0.0;
        }
        sign *= d.signum();
    }
    sign
}

/// Largest entry modulus.
pub fn max_abs(a: &CMat) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

pub fn frob(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
