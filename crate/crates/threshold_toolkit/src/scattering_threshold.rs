//! Threshold scattering: scattering length, optical cross-sections, the
//! threshold S-matrix on the constant spherical mode, transmission
//! defects, and classical eikonal and reduced-flow checks.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit;
use crate::free_resolvent::{resolvent_at_wave_number, wave_number};
use crate::linalg::{self, c, CMat, CVec, C64};
use crate::ode::{dopri5, StepControl};
use crate::special::sph_j;
use crate::threshold_classifier::{c_vector, classify, EffectiveOperator, ThresholdCase, ThresholdReport};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScatteringLength {
    /// Per outgoing channel, for the given incoming channel.
    pub components: Vec<C64>,
    /// 4π Σ|s_k|².
    pub cross_section_limit: f64,
    pub condition: f64,
    pub flags: Vec<String>,
}

impl ScatteringLength {
    pub fn value(&self, channel: usize) -> C64 {
        self.components[channel]
    }
}

/// s_lnt = (4π)⁻¹∫(1 + UG₀)⁻¹U·1 dx for the incoming channel, in reduced
/// s-wave form ∫ r y dr with (1 + UG₀)y = U(e_α ⊗ r).
pub fn scattering_length(op: &EffectiveOperator, incoming: usize) -> Result<ScatteringLength> {
    if incoming >= op.channels {
        return Err(Error::invalid("incoming channel out of range"));
    }
    let report = classify(op)?;
    if report.case != ThresholdCase::Regular {
        return Err(Error::invalid(format!("scattering length needs a regular threshold, found {:?}", report.case)));
    }
    let n = op.grid.len();
    let dim = op.dim();
    let u = op.u_matrix(0);
    let a = CMat::identity(dim, dim) + &u * op.g0_matrix(0);
    let data = CVec::from_fn(dim, |k, _| if k / n == incoming { c(op.grid.nodes[k % n]) } else { c(0.0) });
    let rhs = &u * data;
    let y = linalg::solve_vec(&a, &rhs)?;
    let components: Vec<C64> = (0..op.channels)
        .map(|k| (0..n).map(|i| y[k * n + i] * op.grid.weights[i] * op.grid.nodes[i]).sum())
        .collect();
    let cond = linalg::condition_number(&a)?;
    let mut flags = Vec::new();
    if cond > 1e8 {
        flags.push(format!("near-resonant conditioning ({cond:.2e})"));
    }
    let cs = 4.0 * PI * components.iter().map(|s| s.norm_sqr()).sum::<f64>();
    Ok(ScatteringLength { components, cross_section_limit: cs, condition: cond, flags })
}

/// First Born approximation ∫ U(r) r² dr of the scattering length for a
/// local single-channel potential.
pub fn born_scattering_length(op: &EffectiveOperator) -> f64 {
    op.grid
        .nodes
        .iter()
        .zip(&op.grid.weights)
        .zip(&op.local)
        .map(|((r, w), u)| u[(0, 0)] * r * r * w)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryValue {
    /// Real wave number in the outgoing kernel.
    Exact,
    /// z = λ + iε for ε ∈ {1e−4, …, 1e−7}·(λ − λ₀), extrapolated to ε = 0.
    Richardson,
}

pub const EPS_FACTORS: [f64; 4] = [1e-4, 1e-5, 1e-6, 1e-7];

fn partial_wave_form(op: &EffectiveOperator, incoming: usize, ell: usize, k: f64, kz: C64) -> Result<C64> {
    let n = op.grid.len();
    let dim = op.dim();
    let u = op.u_matrix(ell);
    let r0 = resolvent_at_wave_number(kz, ell, &op.grid).channel_blocks(op.channels).matrix;
    let wave = CVec::from_fn(dim, |idx, _| {
        if idx / n == incoming {
            let r = op.grid.nodes[idx % n];
            if ell == 0 {
                c((k * r).sin() / k)
            } else {
                sph_j(ell, c(k * r)) * r
            }
        } else {
            c(0.0)
        }
    });
    let s = &u * wave;
    let a = CMat::identity(dim, dim) + &r0 * &u;
    let rs = linalg::solve_vec(&a, &(&r0 * &s))?;
    Ok(op.inner(&s, &rs))
}

/// F(z) = Σ_ℓ 4π(2ℓ+1)⟨s_ℓ, R_ℓ(z)s_ℓ⟩ at z with Im √z ≥ 0.
fn forward_form(op: &EffectiveOperator, incoming: usize, k: f64, kz: C64) -> Result<C64> {
    let mut f = c(0.0);
    for &ell in &op.sectors {
        f += partial_wave_form(op, incoming, ell, k, kz)? * (4.0 * PI * (2 * ell + 1) as f64);
    }
    Ok(f)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossSectionSample {
    pub energy: f64,
    pub sigma: f64,
    pub extrapolation_spread: f64,
}

/// σ(λ) = Im F(λ + i0)/√(λ − λ₀) for a radial model (independent of the
/// incident direction), energies measured from λ₀ = 0.
pub fn optical_cross_section(op: &EffectiveOperator, incoming: usize, energy: f64, method: BoundaryValue) -> Result<CrossSectionSample> {
    if !(energy > 0.0) {
        return Err(Error::invalid("energy must lie above the threshold"));
    }
    if incoming >= op.channels {
        return Err(Error::invalid("incoming channel out of range"));
    }
    let k = energy.sqrt();
    match method {
        BoundaryValue::Exact => {
            let f = forward_form(op, incoming, k, c(k))?;
            Ok(CrossSectionSample { energy, sigma: f.im / k, extrapolation_spread: 0.0 })
        }
        BoundaryValue::Richardson => {
            let eps: Vec<f64> = EPS_FACTORS.iter().map(|e| e * energy).collect();
            let vals = eps
                .iter()
                .map(|&e| forward_form(op, incoming, k, wave_number(C64::new(energy, e))?).map(|f| f.im))
                .collect::<Result<Vec<f64>>>()?;
            // Neville extrapolation to ε = 0
            let mut p = vals.clone();
            let nn = p.len();
            for lvl in 1..nn {
                for i in 0..nn - lvl {
                    p[i] = (eps[i + lvl] * p[i] - eps[i] * p[i + 1]) / (eps[i + lvl] - eps[i]);
                }
            }
            let im = p[0];
            let spread = (im - vals[nn - 1]).abs() / im.abs().max(1e-300);
            if !im.is_finite() || spread > 1e-2 {
                return Err(Error::numerical("boundary-value extrapolation did not converge"));
            }
            Ok(CrossSectionSample { energy, sigma: im / k, extrapolation_spread: spread })
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossSectionCurve {
    pub incoming: usize,
    pub samples: Vec<CrossSectionSample>,
    pub fitted_power: f64,
    pub fitted_coefficient: f64,
}

pub fn cross_section_curve(op: &EffectiveOperator, incoming: usize, energies: &[f64], method: BoundaryValue) -> Result<CrossSectionCurve> {
    let samples = energies
        .par_iter()
        .map(|&e| optical_cross_section(op, incoming, e, method))
        .collect::<Result<Vec<_>>>()?;
    let x: Vec<f64> = samples.iter().map(|s| s.energy).collect();
    let y: Vec<f64> = samples.iter().map(|s| s.sigma.abs().max(1e-300)).collect();
    let lf = fit::power_fit(&x, &y)?;
    Ok(CrossSectionCurve { incoming, samples, fitted_power: lf.slope, fitted_coefficient: lf.intercept.exp() })
}

/// Predicted limit of (λ − λ₀)σ_α: 4πΣ_j|c_α(ψ_j)|².
pub fn resonance_law_coefficient(op: &EffectiveOperator, report: &ThresholdReport, incoming: usize) -> f64 {
    4.0 * PI
        * report
            .normalized_resonances
            .iter()
            .map(|psi| c_vector(op, psi)[incoming].norm_sqr())
            .sum::<f64>()
}

/// S(λ₀) = 1 ⊗ (1 − P) + A ⊗ P on C^m ⊗ L²(S²), P = ⟨Y₀, ·⟩Y₀.
#[derive(Debug, Clone)]
pub struct ThresholdSMatrix {
    pub channels: usize,
    /// Π_C = Σ_j c(ψ_j)c(ψ_j)*.
    pub projector: CMat,
    /// A = 1 − 2Π_C.
    pub constant_block: CMat,
    pub maximal: bool,
}

impl ThresholdSMatrix {
    /// ‖1 − S*S‖; only the constant-mode block contributes.
    pub fn unitarity_defect(&self) -> f64 {
        let m = self.channels;
        let a = &self.constant_block;
        linalg::spectral_norm(&(CMat::identity(m, m) - a.adjoint() * a))
    }

    /// Per-channel amplitude on Y₀: 1 − 2Σ_j|c_i(ψ_j)|².
    pub fn channel_amplitudes(&self) -> Vec<C64> {
        (0..self.channels).map(|i| self.constant_block[(i, i)]).collect()
    }

    /// Elastic defect 1 − |a*Aa|² = 4w(1 − w), w = a*Π_C a, for a unit
    /// channel vector a.
    pub fn elastic_defect(&self, a: &[C64]) -> f64 {
        let v = CVec::from_column_slice(a);
        let w = (v.adjoint() * &self.projector * &v)[(0, 0)].re;
        4.0 * w * (1.0 - w)
    }
}

pub fn levinson_from_c(c_vectors: &[Vec<C64>], channels: usize) -> Result<ThresholdSMatrix> {
    if c_vectors.iter().any(|v| v.len() != channels) {
        return Err(Error::invalid("c-vectors must have one entry per channel"));
    }
    let kappa = c_vectors.len();
    let m = channels;
    let maximal = kappa == m;
    let projector = if maximal {
        CMat::identity(m, m)
    } else {
        let mut p = CMat::zeros(m, m);
        for v in c_vectors {
            let cv = CVec::from_column_slice(v);
            p += &cv * cv.adjoint();
        }
        p
    };
    let constant_block = CMat::identity(m, m) - &projector * c(2.0);
    Ok(ThresholdSMatrix { channels: m, projector, constant_block, maximal })
}

/// Limit of the channel S-matrix at threshold from a report with
/// normalised resonances.
pub fn levinson_limit(op: &EffectiveOperator, report: &ThresholdReport) -> Result<ThresholdSMatrix> {
    if report.kappa == 0 {
        return Err(Error::invalid("no threshold resonance: the limit is the identity"));
    }
    let cs: Vec<Vec<C64>> = report.normalized_resonances.iter().map(|p| c_vector(op, p)).collect();
    levinson_from_c(&cs, op.channels)
}

#[derive(Debug, Clone)]
pub struct ChannelMixing {
    pub c_vectors: Vec<Vec<C64>>,
    pub channels: usize,
    /// Rows are the adapted channels φ'_i in terms of the original ones.
    pub mixing: CMat,
}

impl ChannelMixing {
    /// M = Uᵀ with U = [c₁ … c_κ | orthonormal completion].
    pub fn new(c_vectors: Vec<Vec<C64>>, channels: usize) -> Result<Self> {
        let k = c_vectors.len();
        if k > channels {
            return Err(Error::invalid("more resonances than channels"));
        }
        let cols: Vec<CVec> = c_vectors.iter().map(|v| CVec::from_column_slice(v)).collect();
        let mut u = if k == 0 { CMat::zeros(channels, 0) } else { CMat::from_columns(&cols) };
        if k < channels {
            let comp = linalg::orthonormal_complement(&u);
            let mut all = cols.clone();
            all.extend((0..comp.ncols()).map(|j| comp.column(j).into_owned()));
            u = CMat::from_columns(&all);
        }
        Ok(ChannelMixing { c_vectors, channels, mixing: u.transpose() })
    }

    /// Two channels, one resonance with c = (cos θ, sin θ).
    pub fn two_channel(theta: f64) -> Self {
        Self::new(vec![vec![c(theta.cos()), c(theta.sin())]], 2).expect("valid two-channel mixing")
    }

    pub fn unitarity_error(&self) -> f64 {
        let m = self.channels;
        linalg::spectral_norm(&(&self.mixing * self.mixing.adjoint() - CMat::identity(m, m)))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransmissionReport {
    pub kappa: usize,
    pub channels: usize,
    pub unitarity_defect: f64,
    /// Elastic defect of each original channel.
    pub channel_defects: Vec<f64>,
    /// Elastic defect of each adapted channel φ'_i.
    pub adapted_defects: Vec<f64>,
    pub transmitting_channels: Vec<usize>,
    pub mixing_unitarity_error: f64,
}

pub fn transmission_diagnostic(mix: &ChannelMixing) -> Result<TransmissionReport> {
    let s = levinson_from_c(&mix.c_vectors, mix.channels)?;
    let m = mix.channels;
    let unit = |i: usize| -> Vec<C64> { (0..m).map(|k| if k == i { c(1.0) } else { c(0.0) }).collect() };
    let channel_defects: Vec<f64> = (0..m).map(|i| s.elastic_defect(&unit(i))).collect();
    let u = mix.mixing.transpose();
    let adapted_defects = (0..m)
        .map(|j| s.elastic_defect(&u.column(j).iter().copied().collect::<Vec<_>>()))
        .collect();
    let transmitting = (0..m).filter(|&i| channel_defects[i] > 1e-12).collect();
    Ok(TransmissionReport {
        kappa: mix.c_vectors.len(),
        channels: m,
        unitarity_defect: s.unitarity_defect(),
        channel_defects,
        adapted_defects,
        transmitting_channels: transmitting,
        mixing_unitarity_error: mix.unitarity_error(),
    })
}

/// φ(r) = ∫_{R₀}^r √(E − w(s)) ds + √E·R₀ with E = λ − λ₀.
pub fn eikonal_phase<W: Fn(f64) -> f64>(w: W, energy: f64, r0: f64, r: f64) -> Result<f64> {
    if energy < 0.0 || r0 <= 0.0 || r < r0 {
        return Err(Error::invalid("need E ≥ 0 and 0 < R₀ ≤ r"));
    }
    let probe = 64;
    for k in 0..=probe {
        let s = r0 + (r - r0) * k as f64 / probe as f64;
        if energy - w(s) < 0.0 {
            return Err(Error::numerical(format!("classically forbidden region at r = {s:.4}")));
        }
    }
    let out = quadrature::integrate(|s| (energy - w(s)).max(0.0).sqrt(), r0, r, 1e-12);
    Ok(out.integral + energy.sqrt() * r0)
}

/// |(∂_rφ)² + w − E| by five-point differentiation of the phase.
pub fn eikonal_residual<W: Fn(f64) -> f64 + Copy>(w: W, energy: f64, r0: f64, r: f64) -> Result<f64> {
    let h = 1e-3 * r.max(1.0);
    if r - 2.0 * h < r0 {
        return Err(Error::invalid("radius too close to R₀ for the difference stencil"));
    }
    let f = |x: f64| eikonal_phase(w, energy, r0, x);
    let d = (f(r - 2.0 * h)? - 8.0 * f(r - h)? + 8.0 * f(r + h)? - f(r + 2.0 * h)?) / (12.0 * h);
    Ok((d * d + w(r) - energy).abs())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReducedFlowState {
    pub x_hat: Vec<f64>,
    pub c_bar: Vec<f64>,
    pub b: f64,
    pub rho: f64,
}

impl ReducedFlowState {
    pub fn a(&self) -> f64 {
        self.b * self.b + self.c_bar.iter().map(|v| v * v).sum::<f64>()
    }

    pub fn validate(&self) -> Result<()> {
        let nx: f64 = self.x_hat.iter().map(|v| v * v).sum::<f64>().sqrt();
        let dot: f64 = self.x_hat.iter().zip(&self.c_bar).map(|(a, b)| a * b).sum();
        if self.x_hat.len() != self.c_bar.len() || self.x_hat.is_empty() {
            return Err(Error::invalid("x̂ and c̄ must have the same positive dimension"));
        }
        if (nx - 1.0).abs() > 1e-10 || dot.abs() > 1e-10 {
            return Err(Error::invalid("x̂ must be a unit vector orthogonal to c̄"));
        }
        if !(self.rho > 0.0 && self.rho < 2.0) {
            return Err(Error::invalid("ρ must lie in (0, 2)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowTrajectory {
    pub tau: Vec<f64>,
    pub states: Vec<ReducedFlowState>,
    pub max_a_drift: f64,
    pub max_closed_form_error: f64,
}

/// Closed form b(τ) = √a tanh(√a(1 − ρ/2)(τ − τ₀)).
pub fn closed_form_b(a: f64, rho: f64, b0: f64, tau: f64) -> f64 {
    let sa = a.sqrt();
    if sa == 0.0 {
        return b0;
    }
    let k = sa * (1.0 - 0.5 * rho);
    let tau0 = -(b0 / sa).clamp(-1.0 + 1e-16, 1.0 - 1e-16).atanh() / k;
    sa * (k * (tau - tau0)).tanh()
}

/// Integrates x̂' = c̄, c̄' = −(1 − ρ/2)b c̄ − |c̄|²x̂, b' = (1 − ρ/2)|c̄|²,
/// re-projecting onto |x̂| = 1, c̄ ⊥ x̂ after every step.
pub fn reduced_flow(state0: &ReducedFlowState, tau_end: f64, ctl: &StepControl) -> Result<FlowTrajectory> {
    state0.validate()?;
    let d = state0.x_hat.len();
    let kappa = 1.0 - 0.5 * state0.rho;
    let mut y0 = state0.x_hat.clone();
    y0.extend(&state0.c_bar);
    y0.push(state0.b);
    let rhs = move |_t: f64, y: &[f64]| -> Vec<f64> {
        let mut dy = vec![0.0; 2 * d + 1];
        let (x, rest) = y.split_at(d);
        let (cb, b) = rest.split_at(d);
        let b = b[0];
        let c2: f64 = cb.iter().map(|v| v * v).sum();
        for i in 0..d {
            dy[i] = cb[i];
            dy[d + i] = -kappa * b * cb[i] - c2 * x[i];
        }
        dy[2 * d] = kappa * c2;
        dy
    };
    let project = move |y: &mut [f64]| {
        let nx: f64 = y[..d].iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in &mut y[..d] {
            *v /= nx;
        }
        let dot: f64 = (0..d).map(|i| y[i] * y[d + i]).sum();
        for i in 0..d {
            y[d + i] -= dot * y[i];
        }
    };
    let traj = dopri5(rhs, project, 0.0, &y0, tau_end, *ctl)?;
    let a0 = state0.a();
    let mut states = Vec::with_capacity(traj.t.len());
    let (mut drift, mut cf): (f64, f64) = (0.0, 0.0);
    for (t, y) in traj.t.iter().zip(&traj.y) {
        let s = ReducedFlowState { x_hat: y[..d].to_vec(), c_bar: y[d..2 * d].to_vec(), b: y[2 * d], rho: state0.rho };
        drift = drift.max((s.a() - a0).abs());
        cf = cf.max((s.b - closed_form_b(a0, state0.rho, state0.b, *t)).abs());
        states.push(s);
    }
    Ok(FlowTrajectory { tau: traj.t, states, max_a_drift: drift, max_closed_form_error: cf })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_channel_reflection() {
        let s = levinson_from_c(&[vec![c(1.0)]], 1).unwrap();
        assert_eq!(s.channel_amplitudes()[0], c(-1.0));
        assert_eq!(s.unitarity_defect(), 0.0);
    }

    #[test]
    fn mixed_defect_closed_form() {
        let th: f64 = 0.3;
        let t = transmission_diagnostic(&ChannelMixing::two_channel(th)).unwrap();
        let want = 4.0 * th.cos().powi(2) * th.sin().powi(2);
        assert!((t.channel_defects[0] - want).abs() < 1e-12);
        assert!(t.adapted_defects.iter().all(|d| d.abs() < 1e-12));
    }

    #[test]
    fn free_eikonal() {
        let p = eikonal_phase(|_| 0.0, 4.0, 1.0, 3.0).unwrap();
        assert!((p - 6.0).abs() < 1e-10);
    }
}
