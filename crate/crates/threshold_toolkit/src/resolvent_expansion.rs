//! Leading low-energy behaviour of E_H(λ₀ + z)⁻¹ = −(P₀ + U(z) − z)⁻¹ for
//! effective operators, via the inner Grushin problem for
//! W(z) = 1 + r₀(z)U(z).

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit;
use crate::free_resolvent::{exact_free_resolvent, partial_wave_coefficient, wave_number};
use crate::grushin_core::ReductionSetup;
use crate::linalg::{self, c, CMat, CVec, C64};
use crate::threshold_classifier::{c_vector, EffectiveOperator, ThresholdCase, ThresholdReport, ThresholdState};

/// Direction of approach to the threshold, arg z = 3π/4.
pub const RAY_ANGLE: f64 = 0.75 * PI;

pub fn on_ray(modulus: f64) -> C64 {
    C64::from_polar(modulus, RAY_ANGLE)
}

fn quad_diag(op: &EffectiveOperator) -> CVec {
    let n = op.grid.len();
    CVec::from_fn(op.dim(), |k, _| c(op.grid.weights[k % n]))
}

/// Plain L² Gram matrix ⟨a_i, b_j⟩ of column sets.
fn l2_gram(op: &EffectiveOperator, a: &CMat, b: &CMat) -> CMat {
    let w = quad_diag(op);
    let wb = CMat::from_fn(b.nrows(), b.ncols(), |i, j| b[(i, j)] * w[i]);
    a.adjoint() * wb
}

fn columns(states: &[&ThresholdState]) -> Option<CMat> {
    if states.is_empty() {
        return None;
    }
    let cols: Vec<CVec> = states.iter().map(|s| s.vector()).collect();
    Some(CMat::from_columns(&cols))
}

/// U(z) = U + zU₁ on a sector.
fn u_of_z(op: &EffectiveOperator, ell: usize, z: C64) -> CMat {
    op.u_matrix(ell) + op.u1_matrix() * z
}

#[derive(Debug, Clone)]
pub struct WSector {
    pub ell: usize,
    pub w: CMat,
    pub w0: CMat,
    pub w1: CMat,
    pub w2: CMat,
}

#[derive(Debug, Clone)]
pub struct WOperator {
    pub z: C64,
    pub sectors: Vec<WSector>,
}

impl WOperator {
    /// Weighted-norm distance ‖W(z) − W₀‖ per sector.
    pub fn distance_to_w0(&self, op: &EffectiveOperator) -> Vec<f64> {
        let d = op.weight_diagonal();
        self.sectors
            .iter()
            .map(|s| {
                let diff = &s.w - &s.w0;
                let n = diff.nrows();
                linalg::spectral_norm(&CMat::from_fn(n, n, |i, j| diff[(i, j)] * d[i] / d[j]))
            })
            .collect()
    }
}

/// W(z) and its coefficients W₀ = 1 + G₀U, W₁ = G₁U, W₂ = G₂U + G₀U₁.
pub fn w_operator(op: &EffectiveOperator, z: C64) -> Result<WOperator> {
    op.validate()?;
    let m = op.channels;
    let dim = op.dim();
    let id = CMat::identity(dim, dim);
    let u1 = op.u1_matrix();
    let sectors = op
        .sectors
        .iter()
        .map(|&ell| -> Result<WSector> {
            let u = op.u_matrix(ell);
            let g0 = partial_wave_coefficient(0, ell, &op.grid)?.channel_blocks(m).matrix;
            let g1 = partial_wave_coefficient(1, ell, &op.grid)?.channel_blocks(m).matrix;
            let g2 = partial_wave_coefficient(2, ell, &op.grid)?.channel_blocks(m).matrix;
            let r0 = exact_free_resolvent(z, ell, &op.grid)?.channel_blocks(m).matrix;
            Ok(WSector {
                ell,
                w: &id + r0 * (&u + &u1 * z),
                w0: &id + &g0 * &u,
                w1: &g1 * &u,
                w2: &g2 * &u + &g0 * &u1,
                })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(WOperator { z, sectors })
}

#[derive(Debug, Clone)]
pub struct InnerSector {
    pub ell: usize,
    /// K-space basis, orthonormal in ⟨−U·,·⟩.
    pub phi: CMat,
    /// Rows ⟨−Uφ_j, ·⟩.
    pub vs_star: CMat,
    pub q: CMat,
    pub d0: CMat,
    /// Columns c(φ_j).
    pub c: CMat,
}

#[derive(Debug, Clone)]
pub struct InnerGrushin {
    pub sectors: Vec<InnerSector>,
    /// max ‖vS*vS − 1‖ over sectors.
    pub orthonormality_defect: f64,
    /// max ‖Q² − Q‖ over sectors.
    pub projection_defect: f64,
}

/// Builds vS, vS*, Q and D₀ on each sector carrying threshold states.
pub fn inner_grushin(op: &EffectiveOperator, report: &ThresholdReport) -> Result<InnerGrushin> {
    if report.mu == 0 {
        return Err(Error::invalid("inner Grushin problem needs μ ≥ 1"));
    }
    let w = quad_diag(op);
    let dim = op.dim();
    let id = CMat::identity(dim, dim);
    let mut sectors = Vec::new();
    let (mut orth, mut proj) = (0.0f64, 0.0f64);
    for &ell in &op.sectors {
        let states: Vec<&ThresholdState> = report.states.iter().filter(|s| s.ell == ell).collect();
        let Some(phi0) = columns(&states) else { continue };
        let u = op.u_matrix(ell);
        let uphi = &u * &phi0;
        let gram = linalg::hermitian_part(&(-l2_gram(op, &uphi, &phi0)));
        if linalg::min_eig_hermitian(&gram) <= 0.0 {
            return Err(Error::numerical("⟨−U·,·⟩ is not positive on the threshold space"));
        }
        let phi = phi0 * linalg::inv_sqrt_hermitian(&gram)?;
        let uphi = &u * &phi;
        let vs_star = CMat::from_fn(phi.ncols(), dim, |j, i| -uphi[(i, j)].conj() * w[i]);
        let q = &phi * &vs_star;
        let qp = &id - &q;
        let w0 = &id + op.g0_matrix(ell) * &u;
        let d0 = linalg::solve(&(&qp * &w0 * &qp + &q), &qp)?;
        orth = orth.max(linalg::spectral_norm(&(&vs_star * &phi - CMat::identity(phi.ncols(), phi.ncols()))));
        proj = proj.max(linalg::spectral_norm(&(&q * &q - &q)));
        let cm = CMat::from_fn(op.channels, phi.ncols(), |k, j| {
            let st = ThresholdState { ell, multiplicity: 2 * ell + 1, values: phi.column(j).iter().copied().collect() };
            c_vector(op, &st)[k]
        });
        sectors.push(InnerSector { ell, phi, vs_star, q, d0, c: cm });
    }
    Ok(InnerGrushin { sectors, orthonormality_defect: orth, projection_defect: proj })
}

#[derive(Debug, Clone)]
pub struct LeadingMatrices {
    pub ell: usize,
    /// vE_{−+,1} = −vS*W₁vS.
    pub e1: CMat,
    /// B₀ with vE_{−+,1} = iB₀.
    pub b0: CMat,
    /// vE_{−+,1} in the basis of right singular vectors of C: nonzero only
    /// in the leading κ×κ corner.
    pub e1_adapted: CMat,
    /// ⟨φ_i, (1 − U₁)φ_j⟩.
    pub e2: CMat,
    /// −vS*W₂vS from the discretised coefficients.
    pub e2_direct: CMat,
    pub b0_min_eig: f64,
    pub e2_min_eig: f64,
    pub flags: Vec<String>,
}

pub fn leading_e_minus_plus(op: &EffectiveOperator, inner: &InnerGrushin, case: ThresholdCase) -> Result<Vec<LeadingMatrices>> {
    let m = op.channels;
    let u1 = op.u1_matrix();
    let mut out = Vec::new();
    for s in &inner.sectors {
        let u = op.u_matrix(s.ell);
        let g1 = partial_wave_coefficient(1, s.ell, &op.grid)?.channel_blocks(m).matrix;
        let g2 = partial_wave_coefficient(2, s.ell, &op.grid)?.channel_blocks(m).matrix;
        let g0 = op.g0_matrix(s.ell);
        let w1 = &g1 * &u;
        let w2 = &g2 * &u + &g0 * &u1;
        let e1 = -(&s.vs_star * &w1 * &s.phi);
        let b0 = e1.map(|x| x * C64::new(0.0, -1.0));
        let b0_min = linalg::min_eig_hermitian(&linalg::hermitian_part(&b0));
        let v = if s.c.ncols() > 0 {
            let d = linalg::svd(&s.c)?;
            let comp = linalg::orthonormal_complement(&d.v);
            let mut cols: Vec<CVec> = (0..d.v.ncols()).map(|k| d.v.column(k).into_owned()).collect();
            cols.extend((0..comp.ncols()).map(|k| comp.column(k).into_owned()));
            CMat::from_columns(&cols)
        } else {
            CMat::identity(0, 0)
        };
        let e1_adapted = v.adjoint() * &e1 * &v;
        let u1phi = &u1 * &s.phi;
        let e2 = l2_gram(op, &s.phi, &s.phi) - l2_gram(op, &s.phi, &u1phi);
        let e2_direct = -(&s.vs_star * &w2 * &s.phi);
        let e2_min = linalg::min_eig_hermitian(&linalg::hermitian_part(&e2));
        let mut flags = Vec::new();
        if b0_min < -1e-12 {
            flags.push(format!("B₀ has a negative eigenvalue {b0_min:.3e}"));
        }
        if case == ThresholdCase::Exceptional1 && s.ell == 0 && b0_min <= 0.0 {
            flags.push("B₀ is not positive definite".into());
        }
        if matches!(case, ThresholdCase::Exceptional2 | ThresholdCase::Exceptional3) && e2_min <= 0.0 {
            flags.push("⟨φ, (1 − U₁)φ⟩ is not positive definite".into());
        }
        out.push(LeadingMatrices {
            ell: s.ell,
            e1,
            b0,
            e1_adapted,
            e2,
            e2_direct,
            b0_min_eig: b0_min,
            e2_min_eig: e2_min,
            flags,
        });
    }
    Ok(out)
}

/// Decay of the eigenprojection range: ran Π_H ⊂ L²_t.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EigenDecay {
    pub t: f64,
}

#[derive(Debug, Clone)]
pub struct LeadingTerm {
    pub case: ThresholdCase,
    /// E_H(λ₀ + z)⁻¹ ≈ z^power · coefficient, with z^{1/2} on the
    /// physical sheet.
    pub power: f64,
    /// Coefficient matrices per sector (Nyström form).
    pub coefficients: Vec<(usize, CMat)>,
}

impl LeadingTerm {
    pub fn apply(&self, ell: usize, f: &CVec) -> Result<CVec> {
        let (_, m) = self
            .coefficients
            .iter()
            .find(|(l, _)| *l == ell)
            .ok_or_else(|| Error::invalid(format!("sector ℓ = {ell} is not part of the operator")))?;
        Ok(m * f)
    }

    /// z^power.
    pub fn scale(&self, z: C64) -> Result<C64> {
        if self.power == 0.0 {
            Ok(c(1.0))
        } else if self.power == -0.5 {
            Ok(c(1.0) / wave_number(z)?)
        } else {
            Ok(c(1.0) / z)
        }
    }
}

fn projector(op: &EffectiveOperator, states: &[&ThresholdState], metric: Option<&CMat>) -> Result<CMat> {
    let dim = op.dim();
    let Some(e) = columns(states) else { return Ok(CMat::zeros(dim, dim)) };
    let w = quad_diag(op);
    let a = match metric {
        Some(g) => g.clone(),
        None => l2_gram(op, &e, &e),
    };
    let ainv = linalg::inverse(&a)?;
    let ew = CMat::from_fn(dim, e.ncols(), |i, j| e[(i, j)] * w[i]);
    Ok(&e * ainv * ew.adjoint())
}

/// Leading term of E_H(λ₀ + z)⁻¹ in each case.
pub fn leading_resolvent(op: &EffectiveOperator, report: &ThresholdReport, decay: Option<EigenDecay>) -> Result<LeadingTerm> {
    let case = report.case;
    let dim = op.dim();
    let u1 = op.u1_matrix();
    let mut coefficients = Vec::new();
    let power = match case {
        ThresholdCase::Regular => {
            for &ell in &op.sectors {
                let g0 = op.g0_matrix(ell);
                let w0 = CMat::identity(dim, dim) + &g0 * op.u_matrix(ell);
                coefficients.push((ell, -linalg::solve(&w0, &g0)?));
            }
            0.0
        }
        ThresholdCase::Exceptional1 => {
            let w = quad_diag(op);
            for &ell in &op.sectors {
                let mut coef = CMat::zeros(dim, dim);
                for psi in report.normalized_resonances.iter().filter(|s| s.ell == ell) {
                    let v = psi.vector();
                    let vw = CVec::from_fn(dim, |i, _| v[i] * w[i]);
                    coef += &v * vw.adjoint() * C64::new(0.0, -1.0);
                }
                coefficients.push((ell, coef));
            }
            -0.5
        }
        ThresholdCase::Exceptional2 | ThresholdCase::Exceptional3 => {
            match decay {
                Some(d) if d.t > 1.5 => {}
                Some(_) => return Err(Error::invalid("eigenstate decay exponent t must exceed 3/2")),
                None => {
                    return Err(Error::invalid(
                        "eigenvalue cases need decay metadata for ran Π_H (EigenDecay with t > 3/2)",
                    ))
                }
            }
            for &ell in &op.sectors {
                let states: Vec<&ThresholdState> = report.eigenstates.iter().filter(|s| s.ell == ell).collect();
                let metric = match columns(&states) {
                    Some(e) => Some(l2_gram(op, &e, &e) - l2_gram(op, &e, &(&u1 * &e))),
                    None => None,
                };
                coefficients.push((ell, projector(op, &states, metric.as_ref())?));
            }
            -1.0
        }
    };
    Ok(LeadingTerm { case, power, coefficients })
}

/// Orthogonal L² projector onto the eigenstates of one sector.
pub fn eigenprojector(op: &EffectiveOperator, report: &ThresholdReport, ell: usize) -> Result<CMat> {
    let states: Vec<&ThresholdState> = report.eigenstates.iter().filter(|s| s.ell == ell).collect();
    projector(op, &states, None)
}

/// E_H(λ₀ + z)⁻¹f = −(1 + r₀(z)U(z))⁻¹r₀(z)f on one sector.
pub fn direct_inverse_apply(op: &EffectiveOperator, z: C64, ell: usize, f: &CVec) -> Result<CVec> {
    let dim = op.dim();
    let r0 = exact_free_resolvent(z, ell, &op.grid)?.channel_blocks(op.channels).matrix;
    let w = CMat::identity(dim, dim) + &r0 * u_of_z(op, ell, z);
    Ok(-linalg::solve_vec(&w, &(&r0 * f))?)
}

/// Same quantity through −r₀(z)(1 + U(z)r₀(z))⁻¹f.
pub fn push_through_apply(op: &EffectiveOperator, z: C64, ell: usize, f: &CVec) -> Result<CVec> {
    let dim = op.dim();
    let r0 = exact_free_resolvent(z, ell, &op.grid)?.channel_blocks(op.channels).matrix;
    let w = CMat::identity(dim, dim) + u_of_z(op, ell, z) * &r0;
    Ok(-(&r0 * linalg::solve_vec(&w, f)?))
}

/// Relative difference of the two factorisations.
pub fn factorization_defect(op: &EffectiveOperator, z: C64, ell: usize, f: &CVec) -> Result<f64> {
    let a = direct_inverse_apply(op, z, ell, f)?;
    let b = push_through_apply(op, z, ell, f)?;
    Ok(op.weighted_norm(&(&a - &b)) / op.weighted_norm(&a))
}

/// −[(P + σΠ_H − z)⁻¹(1 − Π_H)f − Π_H f/z] with P + σΠ_H − z realised as
/// r₀⁻¹(1 + r₀U + σr₀Π_H).
pub fn deflated_inverse_apply(op: &EffectiveOperator, report: &ThresholdReport, z: C64, sigma: f64, ell: usize, f: &CVec) -> Result<CVec> {
    let dim = op.dim();
    let pi = eigenprojector(op, report, ell)?;
    let r0 = exact_free_resolvent(z, ell, &op.grid)?.channel_blocks(op.channels).matrix;
    let w = CMat::identity(dim, dim) + &r0 * u_of_z(op, ell, z) + &r0 * &pi * c(sigma);
    let rest = f - &pi * f;
    let main = linalg::solve_vec(&w, &(&r0 * rest))?;
    Ok(-(main - (&pi * f) / z))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LawFit {
    pub ell: usize,
    pub moduli: Vec<f64>,
    pub norms: Vec<f64>,
    /// ‖z^{−p}E_H⁻¹f − coefficient·f‖ / ‖coefficient·f‖ per sample.
    pub coefficient_errors: Vec<f64>,
    pub fitted_power: f64,
    pub predicted_power: f64,
    /// The leading coefficient annihilates f (e.g. a sector without
    /// threshold states); the predicted power does not apply.
    pub leading_vanishes: bool,
}

/// Fits ‖E_H(λ₀ + z)⁻¹f‖ against |z| along the ray arg z = 3π/4.
pub fn fit_leading_law(op: &EffectiveOperator, lead: &LeadingTerm, ell: usize, f: &CVec, moduli: &[f64]) -> Result<LawFit> {
    let coef_f = lead.apply(ell, f)?;
    let cn = op.weighted_norm(&coef_f);
    let rows = moduli
        .par_iter()
        .map(|&r| -> Result<(f64, f64)> {
            let z = on_ray(r);
            let v = direct_inverse_apply(op, z, ell, f)?;
            let scaled = &v / lead.scale(z)?;
            let err = if cn > 0.0 { op.weighted_norm(&(scaled - &coef_f)) / cn } else { f64::NAN };
            Ok((op.weighted_norm(&v), err))
        })
        .collect::<Result<Vec<_>>>()?;
    let norms: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let errs = rows.iter().map(|r| r.1).collect();
    let lf = fit::power_fit(moduli, &norms)?;
    Ok(LawFit {
        ell,
        moduli: moduli.to_vec(),
        norms,
        coefficient_errors: errs,
        fitted_power: lf.slope,
        predicted_power: lead.power,
        leading_vanishes: !(cn > 0.0),
    })
}

/// Default sample moduli 10^{−10}, …, 10^{−6}.
pub fn default_moduli() -> Vec<f64> {
    (0..9).map(|k| 10f64.powf(-10.0 + 0.5 * k as f64)).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PositivityCertificate {
    pub lambda0: f64,
    pub min_eig: f64,
    /// ‖dE_H/dz(λ₀) − (S*S + (R'HS)*(R'HS))‖ relative.
    pub identity_residual: f64,
    pub matrix: Vec<Vec<C64>>,
}

/// 1 − U₁ = dE_H/dz at λ₀, computed by a contour integral and compared
/// with S*S + (R'(λ₀)HS)*(R'(λ₀)HS).
pub fn positivity_1_minus_u1(setup: &ReductionSetup, lambda0: f64) -> Result<PositivityCertificate> {
    let dist = setup.distance_to_reduced_spectrum(c(lambda0));
    if dist < 1e-8 {
        return Err(Error::invalid("λ₀ lies in the spectrum of the reduced Hamiltonian"));
    }
    let rp = setup.reduced_resolvent(c(lambda0))?;
    let hs = &setup.h * &setup.s;
    let f = &rp * &hs;
    let formula = setup.s.adjoint() * &setup.s + f.adjoint() * &f;
    let rho = 0.5 * dist;
    let npts = 64;
    let mut deriv = CMat::zeros(formula.nrows(), formula.ncols());
    for k in 0..npts {
        let th = 2.0 * PI * k as f64 / npts as f64;
        let e = C64::from_polar(1.0, th);
        let z = c(lambda0) + e * rho;
        let b = crate::grushin_core::build_blocks(setup, z)?;
        deriv += b.e_h * (e.conj() / (rho * npts as f64));
    }
    let scale = linalg::spectral_norm(&formula).max(1e-300);
    let residual = linalg::spectral_norm(&(&deriv - &formula)) / scale;
    Ok(PositivityCertificate {
        lambda0,
        min_eig: linalg::min_eig_hermitian(&linalg::hermitian_part(&formula)),
        identity_residual: residual,
        matrix: crate::critical_channel::from_mat(&formula),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GevreyConfig {
    /// Decay exponent: w = coupling·⟨r⟩^{−2μ}.
    pub mu: f64,
    pub coupling: f64,
    /// Weight e^{−a⟨r⟩^{1−μ}}.
    pub a: f64,
    pub box_length: f64,
    pub step: f64,
    pub n_max: usize,
}

impl Default for GevreyConfig {
    fn default() -> Self {
        GevreyConfig { mu: 0.5, coupling: 1.0, a: 1.0, box_length: 3000.0, step: 0.5, n_max: 8 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GevreyReport {
    pub n: Vec<usize>,
    pub norms: Vec<f64>,
    pub gamma_hat: f64,
    pub log_c: f64,
    pub gamma_theory: f64,
    pub within_bound: bool,
}

/// Solves a symmetric tridiagonal system (diagonal d, off-diagonal e).
fn tridiag_solve(d: &[f64], e: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = d.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    cp[0] = e.first().copied().unwrap_or(0.0) / d[0];
    dp[0] = rhs[0] / d[0];
    for i in 1..n {
        let den = d[i] - e[i - 1] * cp[i - 1];
        cp[i] = if i + 1 < n { e[i] / den } else { 0.0 };
        dp[i] = (rhs[i] - e[i - 1] * dp[i - 1]) / den;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    x
}

/// a_N = ‖e^{−a⟨r⟩^{1−μ}}R₀(0)^N‖ for the s-wave operator −d² + w on a
/// finite box, with the fitted growth exponent γ̂ of
/// log a_N = (N+1)log C + γN log N.
pub fn gevrey_probe(cfg: &GevreyConfig) -> Result<GevreyReport> {
    if !(cfg.mu > 0.0 && cfg.mu < 1.0) || cfg.a <= 0.0 || cfg.coupling <= 0.0 {
        return Err(Error::invalid("need μ ∈ (0, 1), a > 0 and a repulsive coupling"));
    }
    if cfg.n_max < 2 || cfg.n_max > 10 {
        return Err(Error::invalid("N_max must lie in 2..=10"));
    }
    let n = (cfg.box_length / cfg.step).round() as usize - 1;
    let h = cfg.step;
    let r: Vec<f64> = (1..=n).map(|i| h * i as f64).collect();
    let diag: Vec<f64> = r
        .iter()
        .map(|&x| 2.0 / (h * h) + cfg.coupling * (1.0 + x * x).powf(-cfg.mu))
        .collect();
    let off = vec![-1.0 / (h * h); n - 1];
    let weight: Vec<f64> = r.iter().map(|&x| (-cfg.a * (1.0 + x * x).powf(0.5 * (1.0 - cfg.mu))).exp()).collect();
    let ns: Vec<usize> = (1..=cfg.n_max).collect();
    let norms = ns
        .par_iter()
        .map(|&big_n| -> Result<f64> {
            // power iteration on R^N D² R^N
            let mut x: Vec<f64> = r.iter().map(|&t| (-(t - 50.0).powi(2) / 2000.0).exp() + 1e-3).collect();
            let mut lam = 0.0;
            for it in 0..2000 {
                let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                x.iter_mut().for_each(|v| *v /= nx);
                let mut y = x.clone();
                for _ in 0..big_n {
                    y = tridiag_solve(&diag, &off, &y);
                }
                y.iter_mut().zip(&weight).for_each(|(v, w)| *v *= w * w);
                for _ in 0..big_n {
                    y = tridiag_solve(&diag, &off, &y);
                }
                let new = x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>();
                x = y;
                if it > 5 && (new - lam).abs() <= 1e-12 * new.abs() {
                    lam = new;
                    break;
                }
                lam = new;
            }
            if !(lam > 0.0) || !lam.is_finite() {
                return Err(Error::numerical("power iteration failed for the Gevrey probe"));
            }
            Ok(lam.sqrt())
        })
        .collect::<Result<Vec<_>>>()?;
    let a = nalgebra::DMatrix::from_fn(ns.len(), 2, |i, j| {
        let nn = ns[i] as f64;
        if j == 0 {
            nn + 1.0
        } else {
            nn * nn.ln()
        }
    });
    let b = nalgebra::DVector::from_iterator(ns.len(), norms.iter().map(|v| v.ln()));
    let sol = fit::least_squares(&a, &b)?;
    let gamma_theory = 2.0 * cfg.mu / (1.0 - cfg.mu);
    Ok(GevreyReport {
        n: ns,
        norms,
        gamma_hat: sol[1],
        log_c: sol[0],
        gamma_theory,
        within_bound: sol[1] <= gamma_theory + 0.5,
    })
}
