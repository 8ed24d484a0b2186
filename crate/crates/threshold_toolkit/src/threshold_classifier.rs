//! Zero-energy classification of effective operators P = P₀ + U on R³.
//!
//! Operators live in the reduced partial-wave representation: for each
//! retained angular momentum ℓ a vector is the stack of m channel
//! components u_k(r_i) = r_i f_k(r_i), channel-major (index k·n + i).
//! A sector null vector stands for 2ℓ + 1 states.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::free_resolvent::{bracket, partial_wave_g0, KernelKind, KernelOperator, RadialGrid};
use crate::linalg::{self, c, CMat, CVec, RMat, C64};

pub const NULL_CUTOFF: f64 = 1e-6;
pub const NEAR_THRESHOLD_FACTOR: f64 = 10.0;
pub const TAIL_TOLERANCE: f64 = 1e-6;
/// Absolute cutoff on singular values of the c-matrix (states have unit
/// weighted norm).
pub const C_RANK_CUTOFF: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayClass {
    Fast,
    CoulombAttractive,
    CoulombRepulsive,
    Critical,
}

/// Nonlocal kernel values N(r_i, r_j) on one sector, without quadrature
/// weights; shape (n·m) × (n·m).
#[derive(Debug, Clone)]
pub struct NonlocalBlock {
    pub ell: usize,
    pub kernel: CMat,
}

#[derive(Debug, Clone)]
pub struct EffectiveOperator {
    pub grid: RadialGrid,
    pub channels: usize,
    /// Real symmetric m×m local potential at each node.
    pub local: Vec<RMat>,
    pub nonlocal: Vec<NonlocalBlock>,
    /// First z-coefficient U₁ of the local potential, if any.
    pub u1_local: Option<Vec<RMat>>,
    pub sectors: Vec<usize>,
    pub decay_class: DecayClass,
    pub decay_exponent: f64,
    /// Exponent s of the L²_{−s} space, s ∈ (1/2, 3/2).
    pub weight: f64,
}

impl EffectiveOperator {
    /// Single-channel local operator with the given potential values.
    pub fn local_scalar(grid: RadialGrid, values: &[f64], sectors: Vec<usize>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid("potential length differs from grid length"));
        }
        let local = values.iter().map(|&v| RMat::from_element(1, 1, v)).collect();
        let op = EffectiveOperator {
            grid,
            channels: 1,
            local,
            nonlocal: vec![],
            u1_local: None,
            sectors,
            decay_class: DecayClass::Fast,
            decay_exponent: f64::INFINITY,
            weight: 1.0,
        };
        op.validate()?;
        Ok(op)
    }

    pub fn zero(grid: RadialGrid, channels: usize, sectors: Vec<usize>) -> Self {
        let n = grid.len();
        EffectiveOperator {
            grid,
            channels,
            local: vec![RMat::zeros(channels, channels); n],
            nonlocal: vec![],
            u1_local: None,
            sectors,
            decay_class: DecayClass::Fast,
            decay_exponent: f64::INFINITY,
            weight: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.grid.len() * self.channels
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.grid.len();
        let m = self.channels;
        if m == 0 {
            return Err(Error::invalid("channel count must be positive"));
        }
        if self.sectors.is_empty() {
            return Err(Error::invalid("at least one angular momentum sector is required"));
        }
        if self.local.len() != n {
            return Err(Error::invalid("local potential must have one matrix per node"));
        }
        for (i, w) in self.local.iter().enumerate() {
            if w.shape() != (m, m) {
                return Err(Error::invalid(format!("local potential at node {i} is not {m}×{m}")));
            }
            if (w - w.transpose()).amax() > 1e-12 * (1.0 + w.amax()) || w.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid(format!("local potential at node {i} is not real symmetric")));
            }
        }
        if let Some(u1) = &self.u1_local {
            if u1.len() != n || u1.iter().any(|w| w.shape() != (m, m)) {
                return Err(Error::invalid("U₁ must have one m×m matrix per node"));
            }
        }
        for b in &self.nonlocal {
            if b.kernel.shape() != (n * m, n * m) {
                return Err(Error::invalid("nonlocal kernel has the wrong shape"));
            }
            let asym = linalg::max_abs(&(&b.kernel - b.kernel.adjoint()));
            if asym > 1e-10 * (1.0 + linalg::max_abs(&b.kernel)) {
                return Err(Error::invalid("nonlocal kernel is not Hermitian"));
            }
        }
        if !(self.weight > 0.5 && self.weight < 1.5) {
            return Err(Error::invalid("weight s must lie in (1/2, 3/2)"));
        }
        Ok(())
    }

    fn require_fast(&self) -> Result<()> {
        if self.decay_class != DecayClass::Fast || self.decay_exponent < 3.0 {
            return Err(Error::invalid(
                "classification needs a fast-decaying potential (decay class `fast`, exponent ≥ 3)",
            ));
        }
        Ok(())
    }

    fn assemble_local(&self, values: &[RMat], ell: Option<usize>) -> CMat {
        let n = self.grid.len();
        let m = self.channels;
        let mut u = CMat::zeros(n * m, n * m);
        for i in 0..n {
            for k in 0..m {
                for l in 0..m {
                    u[(k * n + i, l * n + i)] = c(values[i][(k, l)]);
                }
            }
        }
        if let Some(ell) = ell {
            for b in self.nonlocal.iter().filter(|b| b.ell == ell) {
                for col in 0..n * m {
                    let w = self.grid.weights[col % n];
                    for row in 0..n * m {
                        u[(row, col)] += b.kernel[(row, col)] * w;
                    }
                }
            }
        }
        u
    }

    /// Nyström matrix of U on sector ℓ.
    pub fn u_matrix(&self, ell: usize) -> CMat {
        self.assemble_local(&self.local, Some(ell))
    }

    /// Nyström matrix of U₁ (zero when not supplied).
    pub fn u1_matrix(&self) -> CMat {
        match &self.u1_local {
            Some(v) => self.assemble_local(v, None),
            None => CMat::zeros(self.dim(), self.dim()),
        }
    }

    /// G₀ on sector ℓ, block-diagonal in the channels.
    pub fn g0_matrix(&self, ell: usize) -> CMat {
        partial_wave_g0(ell, &self.grid).channel_blocks(self.channels).matrix
    }

    /// Diagonal of the similarity √w_i ⟨r_i⟩^{−s} realising L²_{−s}.
    pub fn weight_diagonal(&self) -> Vec<f64> {
        let n = self.grid.len();
        (0..self.dim())
            .map(|k| {
                let i = k % n;
                self.grid.weights[i].sqrt() * bracket(self.grid.nodes[i], -self.weight)
            })
            .collect()
    }

    /// Plain L²(dr) pairing summed over channels.
    pub fn inner(&self, u: &CVec, v: &CVec) -> C64 {
        self.grid.inner(u, v)
    }

    pub fn weighted_norm(&self, u: &CVec) -> f64 {
        self.weight_diagonal().iter().zip(u.iter()).map(|(d, x)| d * d * x.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Estimate of the potential mass beyond the grid, ∫_R^∞ |U| r dr for a
    /// power-law tail continued from the last node.
    pub fn tail_estimate(&self) -> f64 {
        let n = self.grid.len();
        let r = self.grid.r_max();
        let last = self.local[n - 1].amax();
        let rho = if self.decay_exponent.is_finite() { self.decay_exponent } else { 3.0 };
        let local = if rho > 2.0 { last * r * r / (rho - 2.0) } else { f64::INFINITY };
        let nonlocal = self
            .nonlocal
            .iter()
            .map(|b| {
                let m = self.channels;
                (0..n * m)
                    .filter(|&k| k % n == n - 1)
                    .map(|row| (0..n * m).map(|col| b.kernel[(row, col)].norm() * self.grid.weights[col % n]).sum::<f64>())
                    .fold(0.0, f64::max)
                    * r
                    * r
            })
            .fold(0.0, f64::max);
        local + nonlocal
    }
}

/// K = G₀U on one sector.
pub fn lippmann_schwinger(op: &EffectiveOperator, ell: usize) -> Result<KernelOperator> {
    op.validate()?;
    op.require_fast()?;
    let tail = op.tail_estimate();
    if tail > TAIL_TOLERANCE {
        return Err(Error::numerical(format!(
            "grid extent too small for the potential tail (estimate {tail:.2e})"
        )));
    }
    let k = op.g0_matrix(ell) * op.u_matrix(ell);
    Ok(KernelOperator { matrix: k, kind: KernelKind::LippmannSchwinger { ell }, channels: op.channels })
}

/// 1 + G₀U on one sector.
pub fn sector_matrix(op: &EffectiveOperator, ell: usize) -> Result<CMat> {
    let k = lippmann_schwinger(op, ell)?;
    Ok(CMat::identity(op.dim(), op.dim()) + k.matrix)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SectorNull {
    pub ell: usize,
    pub dim: usize,
    /// Smallest singular values of the weighted 1 + K, ascending.
    pub smallest_singular_values: Vec<f64>,
    pub cutoff: f64,
    pub near_threshold: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThresholdState {
    pub ell: usize,
    pub multiplicity: usize,
    /// Reduced components, channel-major.
    pub values: Vec<C64>,
}

impl ThresholdState {
    pub fn vector(&self) -> CVec {
        CVec::from_vec(self.values.clone())
    }

    fn from_vector(ell: usize, v: &CVec) -> Self {
        ThresholdState { ell, multiplicity: 2 * ell + 1, values: v.iter().copied().collect() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NullSpaceReport {
    pub mu: usize,
    pub sectors: Vec<SectorNull>,
    pub states: Vec<ThresholdState>,
}

/// Null space of 1 + G₀U on every sector, computed in L²_{−s}. States have
/// unit weighted norm.
pub fn null_space(op: &EffectiveOperator) -> Result<NullSpaceReport> {
    let d = op.weight_diagonal();
    let mut sectors = Vec::new();
    let mut states = Vec::new();
    let mut mu = 0;
    for &ell in &op.sectors {
        let a = sector_matrix(op, ell)?;
        let n = a.nrows();
        let weighted = CMat::from_fn(n, n, |i, j| a[(i, j)] * d[i] / d[j]);
        let ns = linalg::null_space(&weighted, NULL_CUTOFF)?;
        let mut small: Vec<f64> = ns.singular_values.iter().rev().take(4).copied().collect();
        small.sort_by(f64::total_cmp);
        let near = ns
            .singular_values
            .iter()
            .any(|&s| s > ns.cutoff && s <= NEAR_THRESHOLD_FACTOR * ns.cutoff);
        let dim = ns.basis.ncols();
        for k in 0..dim {
            let y = ns.basis.column(k);
            let mut v = CVec::from_fn(n, |i, _| y[i] / d[i]);
            // fix the phase so the largest component is real positive
            let (imax, _) = v.iter().enumerate().fold((0, 0.0), |acc, (i, z)| if z.norm() > acc.1 { (i, z.norm()) } else { acc });
            let phase = v[imax] / v[imax].norm();
            v /= phase;
            states.push(ThresholdState::from_vector(ell, &v));
        }
        mu += (2 * ell + 1) * dim;
        sectors.push(SectorNull { ell, dim, smallest_singular_values: small, cutoff: ns.cutoff, near_threshold: near });
    }
    Ok(NullSpaceReport { mu, sectors, states })
}

/// c(v)_k = (2√π)⁻¹ ∫ (Uv)_k dx, which in reduced s-wave form is
/// ∫ r (Uu)_k(r) dr. Higher sectors pair to zero with constants.
pub fn c_vector(op: &EffectiveOperator, state: &ThresholdState) -> Vec<C64> {
    let m = op.channels;
    if state.ell != 0 {
        return vec![c(0.0); m];
    }
    let uv = op.u_matrix(0) * state.vector();
    c_of_applied(op, &uv)
}

fn c_of_applied(op: &EffectiveOperator, uv: &CVec) -> Vec<C64> {
    let n = op.grid.len();
    (0..op.channels)
        .map(|k| (0..n).map(|i| uv[k * n + i] * op.grid.weights[i] * op.grid.nodes[i]).sum())
        .collect()
}

/// Per-channel tail constants −⟨1, (Uv)_k⟩/(4π) = −c_k/(2√π): the limit
/// of r·v_k(r) in three dimensions.
pub fn tail_coefficient(op: &EffectiveOperator, state: &ThresholdState) -> Vec<C64> {
    let s = 2.0 * std::f64::consts::PI.sqrt();
    c_vector(op, state).into_iter().map(|x| -x / s).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ThresholdCase {
    Regular,
    Exceptional1,
    Exceptional2,
    Exceptional3,
}

impl ThresholdCase {
    pub fn from_dims(mu: usize, kappa: usize) -> Self {
        match (mu, kappa) {
            (0, _) => ThresholdCase::Regular,
            (m, k) if k == m => ThresholdCase::Exceptional1,
            (_, 0) => ThresholdCase::Exceptional2,
            _ => ThresholdCase::Exceptional3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub case: ThresholdCase,
    pub mu: usize,
    pub kappa: usize,
    pub channels: usize,
    pub sectors: Vec<SectorNull>,
    /// Basis of the null space, one entry per sector vector.
    pub states: Vec<ThresholdState>,
    pub c_vectors: Vec<Vec<C64>>,
    pub tail_coefficients: Vec<Vec<C64>>,
    /// Resonance basis with orthonormal c-vectors.
    pub normalized_resonances: Vec<ThresholdState>,
    /// Basis of the eigen part (c = 0), unit weighted norm.
    pub eigenstates: Vec<ThresholdState>,
    pub flags: Vec<String>,
}

/// Null space, c-vectors and the case label.
pub fn classify(op: &EffectiveOperator) -> Result<ThresholdReport> {
    let ns = null_space(op)?;
    let m = op.channels;
    let c_vectors: Vec<Vec<C64>> = ns.states.iter().map(|s| c_vector(op, s)).collect();
    let tail_coefficients = ns.states.iter().map(|s| tail_coefficient(op, s)).collect();
    let mut flags = Vec::new();
    if ns.sectors.iter().any(|s| s.near_threshold) {
        flags.push("near-threshold: a singular value of 1 + G₀U lies within 10× of the cutoff".to_string());
    }

    let s_idx: Vec<usize> = (0..ns.states.len()).filter(|&i| ns.states[i].ell == 0).collect();
    let mut kappa = 0;
    let mut normalized = Vec::new();
    let mut eigen = Vec::new();
    if !s_idx.is_empty() {
        let cmat = CMat::from_fn(m, s_idx.len(), |k, j| c_vectors[s_idx[j]][k]);
        let d = linalg::svd(&cmat)?;
        kappa = d.s.iter().filter(|&&x| x > C_RANK_CUTOFF).count();
        let basis: Vec<CVec> = s_idx.iter().map(|&i| ns.states[i].vector()).collect();
        // right singular vectors: first κ span the resonance part
        let full_v = if d.v.ncols() < s_idx.len() {
            let comp = linalg::orthonormal_complement(&d.v);
            let mut cols: Vec<CVec> = (0..d.v.ncols()).map(|k| d.v.column(k).into_owned()).collect();
            cols.extend((0..comp.ncols()).map(|k| comp.column(k).into_owned()));
            CMat::from_columns(&cols)
        } else {
            d.v.clone()
        };
        let combine = |coef: &CVec| -> CVec {
            let mut v = CVec::zeros(op.dim());
            for (j, b) in basis.iter().enumerate() {
                v += b * coef[j];
            }
            v
        };
        let res: Vec<CVec> = (0..kappa).map(|k| combine(&full_v.column(k).into_owned())).collect();
        for k in kappa..s_idx.len() {
            let mut v = combine(&full_v.column(k).into_owned());
            let nrm = op.weighted_norm(&v);
            v.unscale_mut(nrm);
            eigen.push(ThresholdState::from_vector(0, &v));
        }
        if kappa > 0 {
            let states: Vec<ThresholdState> = res.iter().map(|v| ThresholdState::from_vector(0, v)).collect();
            let (psi, cond) = normalize_states(op, &states)?;
            if cond > 1e10 {
                flags.push(format!("ill-conditioned c-vector Gram matrix (condition {cond:.2e})"));
            }
            normalized = psi;
        }
    }
    for s in ns.states.iter().filter(|s| s.ell != 0) {
        eigen.push(s.clone());
    }
    let case = ThresholdCase::from_dims(ns.mu, kappa);
    Ok(ThresholdReport {
        case,
        mu: ns.mu,
        kappa,
        channels: m,
        sectors: ns.sectors,
        states: ns.states,
        c_vectors,
        tail_coefficients,
        normalized_resonances: normalized,
        eigenstates: eigen,
        flags,
    })
}

/// ψ = Σ φ M₀ with M₀ = (C*C)^{−1/2}; returns the new basis and the
/// condition number of C*C.
pub fn normalize_states(op: &EffectiveOperator, states: &[ThresholdState]) -> Result<(Vec<ThresholdState>, f64)> {
    if states.is_empty() {
        return Err(Error::invalid("no resonance states to normalise"));
    }
    let m = op.channels;
    let k = states.len();
    let cmat = CMat::from_fn(m, k, |i, j| c_vector(op, &states[j])[i]);
    let gram = cmat.adjoint() * &cmat;
    let cond = linalg::condition_number(&gram)?;
    let m0 = linalg::inv_sqrt_hermitian(&gram)?;
    let out = (0..k)
        .map(|j| {
            let mut v = CVec::zeros(op.dim());
            for (i, s) in states.iter().enumerate() {
                v += s.vector() * m0[(i, j)];
            }
            ThresholdState::from_vector(states[j].ell, &v)
        })
        .collect();
    Ok((out, cond))
}

/// Re-normalise the resonance basis of a report.
pub fn normalize_resonances(op: &EffectiveOperator, report: &ThresholdReport) -> Result<Vec<ThresholdState>> {
    if report.kappa == 0 {
        return Err(Error::invalid("the report has no resonances"));
    }
    Ok(normalize_states(op, &report.normalized_resonances)?.0)
}

/// Gram matrix of c-vectors of the given states.
pub fn c_gram(op: &EffectiveOperator, states: &[ThresholdState]) -> CMat {
    let cs: Vec<Vec<C64>> = states.iter().map(|s| c_vector(op, s)).collect();
    CMat::from_fn(states.len(), states.len(), |i, j| {
        cs[i].iter().zip(&cs[j]).map(|(a, b)| a.conj() * b).sum()
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailFit {
    pub channel: usize,
    pub fitted: f64,
    pub predicted: f64,
    pub r_squared: f64,
    pub relative_error: f64,
    pub poor_fit: bool,
}

/// Fits r·v_k(r) = A + B/r over the outer third of the grid and compares A
/// with the tail constant from c(v).
pub fn verify_tail(op: &EffectiveOperator, state: &ThresholdState) -> Result<Vec<TailFit>> {
    let n = op.grid.len();
    let r_cut = op.grid.r_max() * 2.0 / 3.0;
    let idx: Vec<usize> = (0..n).filter(|&i| op.grid.nodes[i] >= r_cut).collect();
    if idx.len() < 3 {
        return Err(Error::invalid("too few nodes in the outer third of the grid"));
    }
    let predicted = tail_coefficient(op, state);
    let scale = 2.0 * std::f64::consts::PI.sqrt();
    let mut out = Vec::new();
    for k in 0..op.channels {
        let y: Vec<f64> = idx.iter().map(|&i| state.values[k * n + i].re / scale).collect();
        let a = nalgebra::DMatrix::from_fn(idx.len(), 2, |row, col| if col == 0 { 1.0 } else { 1.0 / op.grid.nodes[idx[row]] });
        let b = nalgebra::DVector::from_vec(y.clone());
        let coef = crate::fit::least_squares(&a, &b)?;
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
        let fitted_vals = &a * &coef;
        let ss_res: f64 = y.iter().zip(fitted_vals.iter()).map(|(v, f)| (v - f).powi(2)).sum();
        let ymax = y.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let r2 = if ss_tot <= 1e-24 * (1.0 + ymax * ymax) * y.len() as f64 { 1.0 } else { 1.0 - ss_res / ss_tot };
        let pred = predicted[k].re;
        let denom = pred.abs().max(1e-300);
        out.push(TailFit {
            channel: k,
            fitted: coef[0],
            predicted: pred,
            r_squared: r2,
            relative_error: (coef[0] - pred).abs() / denom,
            poor_fit: r2 < 0.99,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_potential_is_regular() {
        let op = EffectiveOperator::zero(RadialGrid::log_spaced(1e-3, 30.0, 120).unwrap(), 1, vec![0, 1]);
        let r = classify(&op).unwrap();
        assert_eq!(r.case, ThresholdCase::Regular);
        assert_eq!(r.mu, 0);
        let k = lippmann_schwinger(&op, 0).unwrap();
        assert_eq!(linalg::max_abs(&k.matrix), 0.0);
    }

    #[test]
    fn case_from_dims() {
        assert_eq!(ThresholdCase::from_dims(0, 0), ThresholdCase::Regular);
        assert_eq!(ThresholdCase::from_dims(2, 2), ThresholdCase::Exceptional1);
        assert_eq!(ThresholdCase::from_dims(3, 0), ThresholdCase::Exceptional2);
        assert_eq!(ThresholdCase::from_dims(4, 1), ThresholdCase::Exceptional3);
    }

    #[test]
    fn refuses_slow_decay() {
        let mut op = EffectiveOperator::zero(RadialGrid::log_spaced(1e-3, 30.0, 50).unwrap(), 1, vec![0]);
        op.decay_class = DecayClass::CoulombRepulsive;
        assert!(classify(&op).is_err());
    }
}
