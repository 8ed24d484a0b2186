//! Inverse-square channels: the spectrum of −Δ_θ + q on S^{n−1}, the
//! ν-parametrisation ν² = μ + (n−2)²/4, and Euler-equation Green's
//! functions on [1, ∞).

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, CVec, C64, I};
use crate::special::{real_sph_harmonics, sh_index, sphere_rule};

pub const CLUSTER_TOL: f64 = 1e-8;
pub const BORDERLINE_TOL: f64 = 1e-10;
pub const GALERKIN_TOL: f64 = 1e-8;
pub const MAX_GALERKIN_DEGREE: usize = 40;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AngularPotential {
    /// Constant Hermitian m×m matrix, any sphere dimension.
    Constant { q: Vec<Vec<C64>> },
    /// Coefficients Q_{lm} (m×m each) of q = Σ Q_{lm} Y_{lm} in the real
    /// spherical-harmonic basis, ordered by l² + l + m; n = 3 only.
    Harmonic { lmax: usize, coefficients: Vec<Vec<Vec<C64>>> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AngularOperator {
    /// Dimension n of the ambient space; the sphere is S^{n−1}.
    pub n: usize,
    pub channels: usize,
    pub q: AngularPotential,
}

fn to_mat(rows: &[Vec<C64>], m: usize) -> Result<CMat> {
    if rows.len() != m || rows.iter().any(|r| r.len() != m) {
        return Err(Error::invalid(format!("q blocks must be {m}×{m}")));
    }
    Ok(CMat::from_fn(m, m, |i, j| rows[i][j]))
}

pub fn from_mat(a: &CMat) -> Vec<Vec<C64>> {
    (0..a.nrows()).map(|i| (0..a.ncols()).map(|j| a[(i, j)]).collect()).collect()
}

impl AngularOperator {
    pub fn free(n: usize, m: usize) -> Self {
        AngularOperator { n, channels: m, q: AngularPotential::Constant { q: from_mat(&CMat::zeros(m, m)) } }
    }

    pub fn constant(n: usize, q: &CMat) -> Self {
        AngularOperator { n, channels: q.nrows(), q: AngularPotential::Constant { q: from_mat(q) } }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::invalid("sphere dimension n − 1 must be at least 1"));
        }
        if self.channels == 0 {
            return Err(Error::invalid("channel count must be positive"));
        }
        let herm = |a: &CMat| linalg::max_abs(&(a - a.adjoint())) <= 1e-12 * (1.0 + linalg::max_abs(a));
        match &self.q {
            AngularPotential::Constant { q } => {
                if !herm(&to_mat(q, self.channels)?) {
                    return Err(Error::invalid("q is not Hermitian"));
                }
            }
            AngularPotential::Harmonic { lmax, coefficients } => {
                if self.n != 3 {
                    return Err(Error::invalid("harmonic angular potentials are supported for n = 3 only"));
                }
                if coefficients.len() != (lmax + 1) * (lmax + 1) {
                    return Err(Error::invalid("expected (L+1)² harmonic coefficients"));
                }
                for b in coefficients {
                    if !herm(&to_mat(b, self.channels)?) {
                        return Err(Error::invalid("harmonic coefficient of q is not Hermitian"));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Degree-l harmonic multiplicity on S^{n−1}.
pub fn harmonic_multiplicity(l: usize, n: usize) -> usize {
    let binom = |a: i64, b: i64| -> i64 {
        if a < b || b < 0 || a < 0 {
            return 0;
        }
        let mut r: i64 = 1;
        for k in 0..b {
            r = r * (a - k) / (k + 1);
        }
        r
    };
    let (l, n) = (l as i64, n as i64);
    (binom(l + n - 1, n - 1) - binom(l + n - 3, n - 1)) as usize
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NuEntry {
    pub mu: f64,
    pub nu: C64,
    pub multiplicity: usize,
    /// Harmonic degree when the entry comes from a constant q.
    pub degree: Option<usize>,
    pub eigenvectors: Vec<Vec<C64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NuSpectrum {
    pub n: usize,
    pub channels: usize,
    pub entries: Vec<NuEntry>,
    pub nu0: f64,
    pub s_a: f64,
    /// Distinct ν ∈ (0, 1] with their multiplicities.
    pub sigma_plus: Vec<(f64, usize)>,
    pub d_a: usize,
    pub hardy_ok: bool,
    pub borderline: bool,
    pub galerkin_degree: Option<usize>,
}

/// ν with ν² = μ + (n−2)²/4: ν ≥ 0 above the Hardy limit, ν = −iσ
/// (iν > 0) below it.
pub fn nu_of(mu: f64, n: usize) -> C64 {
    let h = (n as f64 - 2.0).powi(2) / 4.0;
    let nu2 = mu + h;
    if nu2 >= 0.0 {
        c(nu2.sqrt())
    } else {
        -I * (-nu2).sqrt()
    }
}

pub fn hardy_limit(n: usize) -> f64 {
    -(n as f64 - 2.0).powi(2) / 4.0
}

fn finish(n: usize, m: usize, mut entries: Vec<NuEntry>, galerkin_degree: Option<usize>) -> NuSpectrum {
    entries.sort_by(|a, b| a.mu.total_cmp(&b.mu));
    let nu0 = entries.iter().map(|e| e.nu.re).fold(f64::INFINITY, f64::min);
    let mut sigma_plus: Vec<(f64, usize)> = Vec::new();
    for e in &entries {
        if e.nu.im == 0.0 && e.nu.re > 0.0 && e.nu.re <= 1.0 + 1e-12 {
            match sigma_plus.iter_mut().find(|(v, _)| (v - e.nu.re).abs() <= CLUSTER_TOL) {
                Some(slot) => slot.1 += e.multiplicity,
                None => sigma_plus.push((e.nu.re, e.multiplicity)),
            }
        }
    }
    let d_a = sigma_plus.iter().map(|(_, k)| k).sum();
    let min_mu = entries.first().map(|e| e.mu).unwrap_or(f64::INFINITY);
    let hardy_ok = min_mu > hardy_limit(n);
    NuSpectrum {
        n,
        channels: m,
        nu0,
        s_a: 1.0 + nu0,
        sigma_plus,
        d_a,
        hardy_ok,
        borderline: hardy_ok && nu0.abs() <= BORDERLINE_TOL,
        entries,
        galerkin_degree,
    }
}

fn constant_spectrum(n: usize, m: usize, q: &CMat) -> NuSpectrum {
    let (vals, vecs) = linalg::eigh(q);
    let emin = vals.first().copied().unwrap_or(0.0);
    let top = -hardy_limit(n) + 1.0;
    let mut entries = Vec::new();
    let mut l = 0usize;
    loop {
        let ll = (l * (l + n - 2)) as f64;
        let mult = harmonic_multiplicity(l, n);
        let mut k = 0;
        while k < vals.len() {
            let mut j = k + 1;
            while j < vals.len() && (vals[j] - vals[k]).abs() <= CLUSTER_TOL {
                j += 1;
            }
            let mu = ll + vals[k];
            entries.push(NuEntry {
                mu,
                nu: nu_of(mu, n),
                multiplicity: mult * (j - k),
                degree: Some(l),
                eigenvectors: (k..j).map(|c| vecs.column(c).iter().copied().collect()).collect(),
            });
            k = j;
        }
        if ll + emin > top {
            break;
        }
        l += 1;
    }
    finish(n, m, entries, None)
}

fn galerkin_matrix(m: usize, lmax_q: usize, coeffs: &[CMat], deg: usize) -> CMat {
    let nb = (deg + 1) * (deg + 1);
    let rule = sphere_rule(deg + lmax_q / 2 + 2);
    let np = rule.len();
    let samples: Vec<(Vec<f64>, CMat)> = rule
        .par_iter()
        .map(|&(th, ph, _)| {
            let y = real_sph_harmonics(deg.max(lmax_q), th, ph);
            let mut q = CMat::zeros(m, m);
            for (idx, cm) in coeffs.iter().enumerate() {
                q += cm * c(y[idx]);
            }
            (y[..nb].to_vec(), q)
        })
        .collect();
    let y = CMat::from_fn(np, nb, |p, i| c(samples[p].0[i]));
    let yt = y.transpose();
    let mut a = CMat::zeros(nb * m, nb * m);
    for ia in 0..m {
        for ib in 0..m {
            let d = CMat::from_fn(np, nb, |p, i| y[(p, i)] * samples[p].1[(ia, ib)] * rule[p].2);
            let block = &yt * d;
            for i in 0..nb {
                for j in 0..nb {
                    a[(i * m + ia, j * m + ib)] = block[(i, j)];
                }
            }
        }
    }
    for l in 0..=deg {
        for mm in -(l as i64)..=(l as i64) {
            let i = sh_index(l, mm);
            for k in 0..m {
                a[(i * m + k, i * m + k)] += c((l * (l + 1)) as f64);
            }
        }
    }
    linalg::hermitian_part(&a)
}

fn harmonic_spectrum(m: usize, lmax: usize, coeffs: &[CMat]) -> Result<NuSpectrum> {
    let mut deg = lmax.max(4);
    let mut prev: Option<Vec<f64>> = None;
    let (vals, vecs, used) = loop {
        let a = galerkin_matrix(m, lmax, coeffs, deg);
        let (vals, vecs) = linalg::eigh(&a);
        let bottom: Vec<f64> = vals.iter().take(10).copied().collect();
        let converged = prev
            .as_ref()
            .map(|p| p.iter().zip(&bottom).all(|(a, b)| (a - b).abs() < GALERKIN_TOL))
            .unwrap_or(false);
        if converged {
            break (vals, vecs, deg);
        }
        if deg >= MAX_GALERKIN_DEGREE {
            return Err(Error::numerical("harmonic truncation did not converge"));
        }
        prev = Some(bottom);
        deg += 2;
    };
    let top = -hardy_limit(3) + 1.0;
    if vals.last().copied().unwrap_or(f64::NEG_INFINITY) <= top {
        return Err(Error::numerical("harmonic cutoff too small to resolve all ν ≤ 1"));
    }
    // keep eigenvalues well inside the resolved range
    let keep_below = ((deg / 2) * (deg / 2 + 1)) as f64;
    let mut entries = Vec::new();
    let mut k = 0;
    while k < vals.len() && vals[k] <= keep_below.max(top) {
        let mut j = k + 1;
        while j < vals.len() && (vals[j] - vals[k]).abs() <= 1e-6 {
            j += 1;
        }
        let mu = vals[k..j].iter().sum::<f64>() / (j - k) as f64;
        entries.push(NuEntry {
            mu,
            nu: nu_of(mu, 3),
            multiplicity: j - k,
            degree: None,
            eigenvectors: (k..j).map(|cc| vecs.column(cc).iter().copied().collect()).collect(),
        });
        k = j;
    }
    Ok(finish(3, m, entries, Some(used)))
}

/// Spectrum of −Δ_θ + q with its ν-parametrisation and derived constants.
pub fn angular_spectrum(op: &AngularOperator) -> Result<NuSpectrum> {
    op.validate()?;
    match &op.q {
        AngularPotential::Constant { q } => Ok(constant_spectrum(op.n, op.channels, &to_mat(q, op.channels)?)),
        AngularPotential::Harmonic { lmax, coefficients } => {
            let coeffs: Vec<CMat> = coefficients.iter().map(|b| to_mat(b, op.channels)).collect::<Result<_>>()?;
            harmonic_spectrum(op.channels, *lmax, &coeffs)
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResonanceBound {
    pub s_a: f64,
    pub d_a: usize,
    pub borderline: bool,
    pub statement: String,
}

pub fn resonance_bound(spec: &NuSpectrum) -> ResonanceBound {
    let statement = if spec.borderline {
        "borderline: ν₀ = 0, resonance space not classified".to_string()
    } else if !spec.hardy_ok {
        "below the Hardy limit: oscillatory regime, no bound asserted".to_string()
    } else {
        format!(
            "at most {} threshold resonance direction(s); resolvent bounded in weight s_a = {:.6}",
            spec.d_a, spec.s_a
        )
    };
    ResonanceBound { s_a: spec.s_a, d_a: spec.d_a, borderline: spec.borderline, statement }
}

/// Green's function of −d²/dr² + (ν² − 1/4)/r² on [1, ∞) with u(1) = 0.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EulerGreen {
    pub nu: C64,
    pub r_max: f64,
    pub nodes: usize,
}

impl EulerGreen {
    pub fn new(nu: C64, r_max: f64, nodes: usize) -> Result<Self> {
        if nu.re < 0.0 || (nu.re == 0.0 && nu.im > 0.0) {
            return Err(Error::invalid("ν must satisfy Re ν ≥ 0 or iν > 0"));
        }
        if !(r_max > 1.0) || nodes < 3 {
            return Err(Error::invalid("need r_max > 1 and at least three nodes"));
        }
        Ok(EulerGreen { nu, r_max, nodes })
    }

    pub fn step(&self) -> f64 {
        (self.r_max - 1.0) / (self.nodes - 1) as f64
    }

    pub fn grid(&self) -> Vec<f64> {
        let h = self.step();
        (0..self.nodes).map(|i| 1.0 + h * i as f64).collect()
    }

    fn is_zero(&self) -> bool {
        self.nu.norm() < 1e-14
    }

    /// Regular solution, φ(1) = 0, φ'(1) = 1.
    pub fn phi(&self, r: f64) -> C64 {
        if self.is_zero() {
            return c(r.sqrt() * r.ln());
        }
        let lr = r.ln();
        (((c(0.5) + self.nu) * lr).exp() - ((c(0.5) - self.nu) * lr).exp()) / (2.0 * self.nu)
    }

    /// Outgoing solution r^{1/2−ν}.
    pub fn psi(&self, r: f64) -> C64 {
        ((c(0.5) - self.nu) * r.ln()).exp()
    }

    pub fn kernel(&self, r: f64, rp: f64) -> C64 {
        let (lo, hi) = if r <= rp { (r, rp) } else { (rp, r) };
        self.phi(lo) * self.psi(hi)
    }

    pub fn potential(&self, r: f64) -> C64 {
        (self.nu * self.nu - 0.25) / (r * r)
    }
}

#[derive(Debug, Clone)]
pub struct EulerSolution {
    pub r: Vec<f64>,
    pub u: Vec<C64>,
    /// Power-law tail exponent used beyond r_max (None when v vanishes there).
    pub tail_exponent: Option<f64>,
}

/// u = ψ∫₁^r φv + φ∫_r^∞ ψv by cumulative trapezoid, continuing v beyond
/// r_max as a power law fitted to the last two nodes.
pub fn euler_green_apply(g: &EulerGreen, v: &[C64]) -> Result<EulerSolution> {
    let r = g.grid();
    let n = r.len();
    if v.len() != n {
        return Err(Error::invalid("v must be sampled on the Euler grid"));
    }
    let h = g.step();
    let phi: Vec<C64> = r.iter().map(|&x| g.phi(x)).collect();
    let psi: Vec<C64> = r.iter().map(|&x| g.psi(x)).collect();
    let mut inner = vec![c(0.0); n];
    for i in 1..n {
        inner[i] = inner[i - 1] + 0.5 * h * (phi[i - 1] * v[i - 1] + phi[i] * v[i]);
    }
    let mut outer = vec![c(0.0); n];
    let mut tail_exponent = None;
    let (vl, vp) = (v[n - 1], v[n - 2]);
    if vl.norm() > 0.0 {
        if vp.norm() == 0.0 {
            return Err(Error::numerical("cannot extrapolate the tail of v"));
        }
        let p = -(vl.norm() / vp.norm()).ln() / (r[n - 1] / r[n - 2]).ln();
        let e = c(p - 1.5) + g.nu;
        if e.re <= 0.0 {
            return Err(Error::numerical("tail integral of ψv diverges"));
        }
        let rl = r[n - 1];
        outer[n - 1] = vl * ((c(1.5) - g.nu) * rl.ln()).exp() / e;
        tail_exponent = Some(p);
    }
    for i in (0..n - 1).rev() {
        outer[i] = outer[i + 1] + 0.5 * h * (psi[i] * v[i] + psi[i + 1] * v[i + 1]);
    }
    let u = (0..n).map(|i| psi[i] * inner[i] + phi[i] * outer[i]).collect();
    Ok(EulerSolution { r, u, tail_exponent })
}

/// L²-norm of the centred-difference residual −u'' + (ν²−1/4)r⁻²u − v on
/// interior nodes.
pub fn euler_residual(g: &EulerGreen, v: &[C64], sol: &EulerSolution) -> f64 {
    let h = g.step();
    let n = sol.u.len();
    let mut acc = 0.0;
    for i in 1..n - 1 {
        let d2 = (sol.u[i + 1] - 2.0 * sol.u[i] + sol.u[i - 1]) / (h * h);
        let res = -d2 + g.potential(sol.r[i]) * sol.u[i] - v[i];
        acc += res.norm_sqr() * h;
    }
    acc.sqrt()
}

/// Nyström matrix of R_ν on the Euler grid, symmetrised by √w.
pub fn euler_kernel_matrix(g: &EulerGreen) -> CMat {
    let r = g.grid();
    let n = r.len();
    let h = g.step();
    let w: Vec<f64> = (0..n).map(|i| if i == 0 || i == n - 1 { 0.5 * h } else { h }).collect();
    CMat::from_fn(n, n, |i, j| g.kernel(r[i], r[j]) * (w[i] * w[j]).sqrt())
}

/// Smallest eigenvalue of Im R_ν as a quadratic form.
pub fn im_kernel_min_eig(g: &EulerGreen) -> f64 {
    let k = euler_kernel_matrix(g);
    linalg::min_eig_hermitian(&linalg::imaginary_part(&k))
}

/// Smooth step: 0 for r ≤ a, 1 for r ≥ b.
pub fn smooth_step(r: f64, a: f64, b: f64) -> f64 {
    if r <= a {
        return 0.0;
    }
    if r >= b {
        return 1.0;
    }
    let t = (r - a) / (b - a);
    let f = |x: f64| if x > 0.0 { (-1.0 / x).exp() } else { 0.0 };
    f(t) / (f(t) + f(1.0 - t))
}

pub const CUTOFF_INNER: f64 = 4.0;
pub const CUTOFF_OUTER: f64 = 8.0;

pub fn chi1(r: f64) -> f64 {
    (0.5 * PI * smooth_step(r, CUTOFF_INNER, CUTOFF_OUTER)).cos()
}

pub fn chi2(r: f64) -> f64 {
    (0.5 * PI * smooth_step(r, CUTOFF_INNER, CUTOFF_OUTER)).sin()
}

#[derive(Debug, Clone)]
pub struct ParametrixSector {
    pub nu: C64,
    pub multiplicity: usize,
    /// Kernel values G₊(r_i, r_j) on the uniform grid (no weights).
    pub kernel: CMat,
}

#[derive(Debug, Clone)]
pub struct Parametrix {
    pub r: Vec<f64>,
    pub step: f64,
    pub sectors: Vec<ParametrixSector>,
}

impl Parametrix {
    /// Nyström matrix of sector k and its adjoint.
    pub fn matrices(&self, k: usize) -> (CMat, CMat) {
        let m = self.sectors[k].kernel.map(|z| z * self.step);
        let a = m.adjoint();
        (m, a)
    }

    /// Smallest eigenvalue of Im G₊ over all sectors.
    pub fn im_min_eig(&self) -> f64 {
        self.sectors
            .iter()
            .map(|s| linalg::min_eig_hermitian(&linalg::imaginary_part(&s.kernel.map(|z| z * self.step))))
            .fold(f64::INFINITY, f64::min)
    }
}

/// G₊ = χ₁(h − i)⁻¹χ₁ + χ₂R_νχ₂ per sector with real ν ≤ nu_max, in
/// reduced radial coordinates on the uniform grid h, 2h, …, r_max. The
/// interior resolvent is the finite-difference inverse with Dirichlet ends.
pub fn parametrix_assemble(spec: &NuSpectrum, r_max: f64, nodes: usize, nu_max: f64) -> Result<Parametrix> {
    if r_max <= CUTOFF_OUTER {
        return Err(Error::invalid("r_max must exceed the outer cutoff radius"));
    }
    let h = r_max / nodes as f64;
    let r: Vec<f64> = (1..=nodes).map(|i| h * i as f64).collect();
    let c1: Vec<f64> = r.iter().map(|&x| chi1(x)).collect();
    let c2: Vec<f64> = r.iter().map(|&x| chi2(x)).collect();
    let chosen: Vec<&NuEntry> = spec.entries.iter().filter(|e| e.nu.im == 0.0 && e.nu.re <= nu_max).collect();
    let sectors = chosen
        .par_iter()
        .map(|e| -> Result<ParametrixSector> {
            let pot = (e.nu * e.nu - 0.25).re;
            let mut a = CMat::zeros(nodes, nodes);
            for i in 0..nodes {
                a[(i, i)] = c(2.0 / (h * h) + pot / (r[i] * r[i])) - I;
                if i + 1 < nodes {
                    a[(i, i + 1)] = c(-1.0 / (h * h));
                    a[(i + 1, i)] = c(-1.0 / (h * h));
                }
            }
            let inv = linalg::inverse(&a).map_err(|_| Error::numerical("interior resolvent solve failed"))?;
            let g = EulerGreen::new(e.nu, r_max, 3)?;
            let kernel = CMat::from_fn(nodes, nodes, |i, j| {
                let interior = inv[(i, j)] / h * c1[i] * c1[j];
                let exterior = if c2[i] > 0.0 && c2[j] > 0.0 { g.kernel(r[i], r[j]) * c2[i] * c2[j] } else { c(0.0) };
                interior + exterior
            });
            Ok(ParametrixSector { nu: e.nu, multiplicity: e.multiplicity, kernel })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Parametrix { r, step: h, sectors })
}

/// Applies a sector of the parametrix to samples v on its grid.
pub fn parametrix_apply(p: &Parametrix, k: usize, v: &CVec) -> CVec {
    p.matrices(k).0 * v
}
