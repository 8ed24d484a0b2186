//! Special functions: complex spherical Bessel/Hankel functions, real
//! spherical harmonics and Gauss-Legendre rules.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64 as C64;

const IU: C64 = C64 { re: 0.0, im: 1.0 };

/// Spherical Bessel function j_ℓ at complex argument.
pub fn sph_j(ell: usize, x: C64) -> C64 {
    let ax = x.norm();
    if ax < 1.0 + ell as f64 {
        return sph_j_series(ell, x);
    }
    let j0 = x.sin() / x;
    if ell == 0 {
        return j0;
    }
    let mut prev = j0;
    let mut cur = x.sin() / (x * x) - x.cos() / x;
    for n in 1..ell {
        let next = cur * ((2 * n + 1) as f64) / x - prev;
        prev = cur;
        cur = next;
    }
    cur
}

fn sph_j_series(ell: usize, x: C64) -> C64 {
    let mut dfact = 1.0;
    for k in 0..=ell {
        dfact *= (2 * k + 1) as f64;
    }
    let lead = x.powu(ell as u32) / dfact;
    let y = -x * x * 0.5;
    let mut term = C64::new(1.0, 0.0);
    let mut sum = term;
    for n in 1..200 {
        term = term * y / ((n as f64) * ((2 * ell + 2 * n + 1) as f64));
        sum += term;
        if term.norm() < 1e-17 * sum.norm() {
            break;
        }
    }
    lead * sum
}

/// Spherical Hankel function of the first kind h_ℓ^(1) at complex argument.
pub fn sph_h1(ell: usize, x: C64) -> C64 {
    let e = (IU * x).exp();
    let h0 = -IU * e / x;
    if ell == 0 {
        return h0;
    }
    let mut prev = h0;
    let mut cur = -e * (x + IU) / (x * x);
    for n in 1..ell {
        let next = cur * ((2 * n + 1) as f64) / x - prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Index of the real harmonic Y_{ℓm} in a degree-ordered basis.
#[inline]
pub fn sh_index(l: usize, m: i64) -> usize {
    (l * l) + (l as i64 + m) as usize
}

/// All real orthonormal spherical harmonics up to degree `lmax` at (θ, φ),
/// ordered by [`sh_index`].
pub fn real_sph_harmonics(lmax: usize, theta: f64, phi: f64) -> Vec<f64> {
    let (st, ct) = theta.sin_cos();
    let n = lmax + 1;
    // p[l][m] fully normalised associated Legendre values (no Condon-Shortley phase).
    let mut p = vec![vec![0.0; n]; n];
    p[0][0] = 1.0 / (4.0 * PI).sqrt();
    for m in 1..n {
        p[m][m] = ((2 * m + 1) as f64 / (2 * m) as f64).sqrt() * st * p[m - 1][m - 1];
    }
    for m in 0..n {
        if m + 1 < n {
            p[m + 1][m] = ((2 * m + 3) as f64).sqrt() * ct * p[m][m];
        }
        for l in (m + 2)..n {
            let lf = l as f64;
            let mf = m as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
            p[l][m] = a * (ct * p[l - 1][m] - b * p[l - 2][m]);
        }
    }
    let mut out = vec![0.0; n * n];
    let s2 = 2f64.sqrt();
    for l in 0..n {
        out[sh_index(l, 0)] = p[l][0];
        for m in 1..=l {
            let (s, c) = ((m as f64) * phi).sin_cos();
            out[sh_index(l, m as i64)] = s2 * p[l][m] * c;
            out[sh_index(l, -(m as i64))] = s2 * p[l][m] * s;
        }
    }
    out
}

/// Gauss-Legendre nodes and weights on [a, b].
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let rule = GaussLegendre::new(NonZeroUsize::new(n.max(1)).expect("nonzero"));
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    rule.as_node_weight_pairs().iter().map(|&(x, w)| (mid + half * x, half * w)).collect()
}

/// Product rule on the unit sphere: Gauss-Legendre in cos θ times uniform φ.
/// Exact for polynomials of degree ≤ 2n−1 in the harmonics.
pub fn sphere_rule(n: usize) -> Vec<(f64, f64, f64)> {
    let nphi = 2 * n;
    let mut pts = Vec::with_capacity(n * nphi);
    for (x, w) in gauss_legendre(n, -1.0, 1.0) {
        let theta = x.acos();
        for k in 0..nphi {
            let phi = 2.0 * PI * (k as f64) / (nphi as f64);
            pts.push((theta, phi, w * 2.0 * PI / nphi as f64));
        }
    }
    pts
}
