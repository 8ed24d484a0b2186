//! Free resolvent of −Δ in three dimensions: low-energy coefficients G_j,
//! the exact outgoing kernel, and their reduced partial-wave forms on a
//! radial quadrature grid.
//!
//! Reduced radial functions are u(r) = r·f(r) per angular momentum sector
//! ℓ, so that ‖f‖_{L²(R³)} = ‖u‖_{L²(dr)} within one (2ℓ+1)-fold sector.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, CVec, C64, I};
use crate::special::{sph_h1, sph_j};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Exponent s of the ⟨r⟩^{−s} weight used for weighted norms.
    pub weight_exponent: f64,
}

impl RadialGrid {
    /// Trapezoid weights on the given nodes, with the integrand taken to
    /// vanish at r = 0.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::invalid("radial grid needs at least two nodes"));
        }
        if !(nodes[0] > 0.0) || nodes.windows(2).any(|w| !(w[1] > w[0])) || !nodes.iter().all(|r| r.is_finite()) {
            return Err(Error::invalid("radial nodes must be positive, finite and strictly increasing"));
        }
        let n = nodes.len();
        let mut weights = vec![0.0; n];
        for i in 0..n {
            let left = if i == 0 { 0.0 } else { nodes[i - 1] };
            let right = if i + 1 == n { nodes[i] } else { nodes[i + 1] };
            weights[i] = 0.5 * (right - left);
        }
        Ok(RadialGrid { nodes, weights, weight_exponent: 1.0 })
    }

    /// Logarithmically spaced nodes on [r_min, r_max].
    pub fn log_spaced(r_min: f64, r_max: f64, n: usize) -> Result<Self> {
        if !(r_min > 0.0 && r_max > r_min) || n < 2 {
            return Err(Error::invalid("log grid needs 0 < r_min < r_max and n ≥ 2"));
        }
        let step = (r_max / r_min).ln() / (n - 1) as f64;
        let mut nodes: Vec<f64> = (0..n).map(|i| r_min * (step * i as f64).exp()).collect();
        nodes[n - 1] = r_max;
        Self::from_nodes(nodes)
    }

    /// 400 log-spaced nodes on [1e−3, 60].
    pub fn default_grid() -> Self {
        Self::log_spaced(1e-3, 60.0, 400).expect("valid default grid")
    }

    /// Uniform nodes h, 2h, …, r_max.
    pub fn uniform(r_max: f64, n: usize) -> Result<Self> {
        let h = r_max / n as f64;
        Self::from_nodes((1..=n).map(|i| h * i as f64).collect())
    }

    /// Piecewise-uniform nodes; each segment `(end, count)` is filled
    /// uniformly from the previous end, so every `end` is a node.
    pub fn piecewise_uniform(segments: &[(f64, usize)]) -> Result<Self> {
        let mut nodes = Vec::new();
        let mut start = 0.0;
        for &(end, count) in segments {
            if !(end > start) || count == 0 {
                return Err(Error::invalid("segments must increase and be nonempty"));
            }
            let h = (end - start) / count as f64;
            for i in 1..=count {
                nodes.push(if i == count { end } else { start + h * i as f64 });
            }
            start = end;
        }
        Self::from_nodes(nodes)
    }

    pub fn with_weight_exponent(mut self, s: f64) -> Self {
        self.weight_exponent = s;
        self
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn r_max(&self) -> f64 {
        *self.nodes.last().expect("nonempty grid")
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.weights.iter().zip(f).map(|(w, v)| w * v).sum()
    }

    pub fn inner(&self, u: &CVec, v: &CVec) -> C64 {
        let n = self.len();
        (0..u.len()).map(|k| u[k].conj() * v[k] * self.weights[k % n]).sum()
    }

    pub fn norm(&self, u: &CVec) -> f64 {
        self.inner(u, u).re.max(0.0).sqrt()
    }

    /// Norm in L²_{−s} with the grid's weight exponent.
    pub fn weighted_norm(&self, u: &CVec) -> f64 {
        let n = self.len();
        let s = self.weight_exponent;
        (0..u.len())
            .map(|k| {
                let r = self.nodes[k % n];
                self.weights[k % n] * u[k].norm_sqr() * (1.0 + r * r).powf(-s)
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// ⟨r⟩^p = (1 + r²)^{p/2}
#[inline]
pub fn bracket(r: f64, p: f64) -> f64 {
    (1.0 + r * r).powf(0.5 * p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum KernelKind {
    /// Low-energy coefficient G_j in sector ℓ.
    Coefficient { j: usize, ell: usize },
    /// Exact free resolvent at wave number k (Im k ≥ 0) in sector ℓ.
    Exact { k_re: f64, k_im: f64, ell: usize },
    /// Lippmann-Schwinger operator G₀U in sector ℓ.
    LippmannSchwinger { ell: usize },
}

/// Dense Nyström matrix of a kernel: entry (i, j) is K(r_i, r_j)·w_j, so
/// that matrix-vector products apply the integral operator.
#[derive(Debug, Clone)]
pub struct KernelOperator {
    pub matrix: CMat,
    pub kind: KernelKind,
    pub channels: usize,
}

impl KernelOperator {
    pub fn apply(&self, v: &CVec) -> CVec {
        &self.matrix * v
    }

    /// Block-diagonal copy for m identical channels.
    pub fn channel_blocks(&self, m: usize) -> KernelOperator {
        let n = self.matrix.nrows();
        let mut big = CMat::zeros(n * m, n * m);
        for k in 0..m {
            big.view_mut((k * n, k * n), (n, n)).copy_from(&self.matrix);
        }
        KernelOperator { matrix: big, kind: self.kind, channels: m }
    }
}

/// 3D coefficient kernel G_j(x, y) = i^j |x − y|^{j−1} / (4π j!).
pub fn green_kernel(j: usize, x: [f64; 3], y: [f64; 3]) -> Result<C64> {
    let d = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2) + (x[2] - y[2]).powi(2)).sqrt();
    if j == 0 && d == 0.0 {
        return Err(Error::numerical("G₀ is singular on the diagonal"));
    }
    let fact: f64 = (1..=j).map(|k| k as f64).product();
    Ok(I.powu(j as u32) * d.powi(j as i32 - 1) / (4.0 * PI * fact))
}

/// Reduced partial-wave kernel of G_j, j ∈ {0, 1, 2}.
pub fn reduced_coefficient(j: usize, ell: usize, r: f64, rp: f64) -> Result<C64> {
    let (lo, hi) = if r <= rp { (r, rp) } else { (rp, r) };
    let l = ell as f64;
    let g0 = lo.powi(ell as i32 + 1) * hi.powi(-(ell as i32)) / (2.0 * l + 1.0);
    match j {
        0 => Ok(c(g0)),
        1 => Ok(if ell == 0 { I * r * rp } else { c(0.0) }),
        2 => Ok(c(g0 * (hi * hi / (2.0 * (2.0 * l - 1.0)) - lo * lo / (2.0 * (2.0 * l + 3.0))))),
        _ => Err(Error::invalid("only G₀, G₁, G₂ have reduced forms here")),
    }
}

/// Exact reduced outgoing kernel i k r r' j_ℓ(k r_<) h_ℓ(k r_>).
pub fn reduced_resolvent_kernel(ell: usize, k: C64, r: f64, rp: f64) -> C64 {
    let (lo, hi) = if r <= rp { (r, rp) } else { (rp, r) };
    if ell == 0 {
        return (k * lo).sin() * (I * k * hi).exp() / k;
    }
    I * k * r * rp * sph_j(ell, k * lo) * sph_h1(ell, k * hi)
}

/// √z on the physical sheet (Im √z > 0); z on [0, ∞) is rejected.
pub fn wave_number(z: C64) -> Result<C64> {
    if z.im == 0.0 && z.re >= 0.0 {
        return Err(Error::invalid("z lies on the spectrum [0, ∞) of −Δ"));
    }
    let k = z.sqrt();
    Ok(if k.im < 0.0 { -k } else { k })
}

fn assemble<F>(grid: &RadialGrid, f: F) -> CMat
where
    F: Fn(f64, f64) -> C64 + Sync,
{
    let n = grid.len();
    let rows: Vec<Vec<C64>> = (0..n)
        .into_par_iter()
        .map(|i| (0..n).map(|j| f(grid.nodes[i], grid.nodes[j]) * grid.weights[j]).collect())
        .collect();
    CMat::from_fn(n, n, |i, j| rows[i][j])
}

pub fn partial_wave_g0(ell: usize, grid: &RadialGrid) -> KernelOperator {
    partial_wave_coefficient(0, ell, grid).expect("j = 0 is supported")
}

pub fn partial_wave_coefficient(j: usize, ell: usize, grid: &RadialGrid) -> Result<KernelOperator> {
    if j > 2 {
        return Err(Error::invalid("only G₀, G₁, G₂ have reduced forms here"));
    }
    let m = assemble(grid, |r, rp| reduced_coefficient(j, ell, r, rp).expect("j ≤ 2"));
    Ok(KernelOperator { matrix: m, kind: KernelKind::Coefficient { j, ell }, channels: 1 })
}

/// Exact r₀(z) in sector ℓ; z on [0, ∞) is rejected.
pub fn exact_free_resolvent(z: C64, ell: usize, grid: &RadialGrid) -> Result<KernelOperator> {
    let k = wave_number(z)?;
    Ok(resolvent_at_wave_number(k, ell, grid))
}

/// r₀ at wave number k with Im k ≥ 0; real k > 0 gives the boundary value
/// r₀(k² + i0).
pub fn resolvent_at_wave_number(k: C64, ell: usize, grid: &RadialGrid) -> KernelOperator {
    let m = assemble(grid, |r, rp| reduced_resolvent_kernel(ell, k, r, rp));
    KernelOperator { matrix: m, kind: KernelKind::Exact { k_re: k.re, k_im: k.im, ell }, channels: 1 }
}

/// Sectors included in the weighted expansion residual.
pub const RESIDUAL_SECTORS: [usize; 3] = [0, 1, 2];

/// Weighted operator norm ‖⟨r⟩^{−s}(r₀(z) − Σ_{j≤N} z^{j/2}G_j)⟨r⟩^{−s}‖,
/// maximised over the low partial waves.
pub fn expansion_residual(z: C64, order: usize, s: f64, grid: &RadialGrid) -> Result<f64> {
    if order > 2 {
        return Err(Error::invalid("expansion order must be 0, 1 or 2"));
    }
    if s <= order as f64 + 0.5 {
        return Err(Error::invalid(format!("weight s = {s} must exceed N + 1/2 = {}", order as f64 + 0.5)));
    }
    let k = wave_number(z)?;
    let n = grid.len();
    let mut worst: f64 = 0.0;
    for &ell in &RESIDUAL_SECTORS {
        let rows: Vec<Vec<C64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let r = grid.nodes[i];
                (0..n)
                    .map(|j| {
                        let rp = grid.nodes[j];
                        let mut v = reduced_resolvent_kernel(ell, k, r, rp);
                        let mut kp = c(1.0);
                        for jj in 0..=order {
                            v -= kp * reduced_coefficient(jj, ell, r, rp).expect("j ≤ 2");
                            kp *= k;
                        }
                        let wl = (grid.weights[i]).sqrt() * bracket(r, -s);
                        let wr = (grid.weights[j]).sqrt() * bracket(rp, -s);
                        v * wl * wr
                    })
                    .collect()
            })
            .collect();
        let a = CMat::from_fn(n, n, |i, j| rows[i][j]);
        worst = worst.max(linalg::spectral_norm(&a));
    }
    Ok(worst)
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpansionFit {
    pub order: usize,
    pub weight: f64,
    pub z: Vec<f64>,
    pub residuals: Vec<f64>,
    pub slope: f64,
}

/// Fit of log residual against log |z| along z = −10^{−k}.
pub fn expansion_slope(order: usize, s: f64, exponents: &[i32], grid: &RadialGrid) -> Result<ExpansionFit> {
    let mut zs = Vec::new();
    let mut res = Vec::new();
    for &e in exponents {
        let z = -(10f64).powi(-e);
        zs.push(z.abs());
        res.push(expansion_residual(c(z), order, s, grid)?);
    }
    let fit = crate::fit::power_fit(&zs, &res)?;
    Ok(ExpansionFit { order, weight: s, z: zs, residuals: res, slope: fit.slope })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coefficient_values() {
        let g1 = green_kernel(1, [0.0; 3], [1.0, 2.0, 3.0]).unwrap();
        assert!((g1 - I / (4.0 * PI)).norm() < 1e-15);
        let g0 = green_kernel(0, [0.0; 3], [2.0, 0.0, 0.0]).unwrap();
        assert!((g0.re - 1.0 / (8.0 * PI)).abs() < 1e-15);
        let g2 = green_kernel(2, [0.0; 3], [1.0, 0.0, 0.0]).unwrap();
        assert!((g2.re + 1.0 / (8.0 * PI)).abs() < 1e-15);
        assert!(green_kernel(0, [1.0; 3], [1.0; 3]).is_err());
    }

    #[test]
    fn p_wave_kernel_value() {
        let v = reduced_coefficient(0, 1, 1.0, 2.0).unwrap();
        assert!((v.re - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn wave_number_branch() {
        assert!((wave_number(c(-1.0)).unwrap() - I).norm() < 1e-15);
        assert!(wave_number(C64::new(0.3, -0.1)).unwrap().im > 0.0);
        assert!(wave_number(c(0.5)).is_err());
    }

    #[test]
    fn piecewise_grid_contains_breakpoints() {
        let g = RadialGrid::piecewise_uniform(&[(1.0, 10), (3.0, 4)]).unwrap();
        assert!(g.nodes.contains(&1.0));
        let lin: Vec<f64> = g.nodes.clone();
        assert!((g.integrate(&lin) - 4.5).abs() < 1e-13);
    }
}
