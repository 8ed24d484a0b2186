//! Abstract Grushin (Feshbach) reduction on finite-dimensional model spaces.
//!
//! Given a Hermitian `H` on G and an injective `S: H_aux → G`, the blocks
//! E(z), E₊(z), E₋(z), E_H(z) reproduce the full resolvent through
//! (H − z)⁻¹ = E − E₊ E_H⁻¹ E₋.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, C64};

/// Largest model space accepted by the exact-identity routines.
pub const MAX_MODEL_DIM: usize = 512;
/// Relative cutoff for rank decisions.
pub const RANK_CUT: f64 = 1e-12;
/// Minimal distance of a real spectral parameter from σ(H').
pub const REAL_Z_MARGIN: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct ReductionSetup {
    pub h: CMat,
    pub s: CMat,
    /// Π = S(S*S)⁻¹S*
    pub pi: CMat,
    pub pi_perp: CMat,
    /// H' = Π'HΠ'
    pub h_perp: CMat,
    /// T = S(S*S)⁻¹
    pub t: CMat,
    /// Orthonormal basis of ran Π'.
    perp_basis: CMat,
    /// Spectrum of H' restricted to ran Π'.
    pub reduced_spectrum: Vec<f64>,
}

impl ReductionSetup {
    pub fn new(h: CMat, s: CMat) -> Result<Self> {
        let n = h.nrows();
        if h.ncols() != n || s.nrows() != n {
            return Err(Error::invalid("H must be square and S must map into its space"));
        }
        if n > MAX_MODEL_DIM {
            return Err(Error::invalid(format!("model dimension {n} exceeds {MAX_MODEL_DIM}")));
        }
        if s.ncols() == 0 || s.ncols() >= n {
            return Err(Error::invalid("S needs 0 < rank < dim G"));
        }
        let herm_defect = (&h - h.adjoint()).norm();
        if herm_defect > 1e-12 * h.norm().max(1.0) {
            return Err(Error::invalid("H is not Hermitian"));
        }
        let d = linalg::svd(&s)?;
        let smax = d.s[0];
        let smin = *d.s.last().expect("nonempty");
        if smin <= RANK_CUT * smax {
            return Err(Error::invalid("S is not injective (S*S singular)"));
        }
        let sts = s.adjoint() * &s;
        let sts_inv = linalg::inverse(&sts)?;
        let t = &s * &sts_inv;
        let pi = &t * s.adjoint();
        let pi_perp = CMat::identity(n, n) - &pi;
        let h_perp = &pi_perp * &h * &pi_perp;
        let perp_basis = linalg::orthonormal_complement(&d.u);
        let hr = perp_basis.adjoint() * &h * &perp_basis;
        let reduced_spectrum = linalg::eigvals_hermitian(&hr);
        Ok(ReductionSetup { h, s, pi, pi_perp, h_perp, t, perp_basis, reduced_spectrum })
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    pub fn aux_dim(&self) -> usize {
        self.s.ncols()
    }

    pub fn distance_to_reduced_spectrum(&self, z: C64) -> f64 {
        self.reduced_spectrum.iter().map(|&e| (c(e) - z).norm()).fold(f64::INFINITY, f64::min)
    }

    /// R'(z) = (H' − z)⁻¹ Π', inverted on ran Π'.
    pub fn reduced_resolvent(&self, z: C64) -> Result<CMat> {
        if z.im == 0.0 && self.distance_to_reduced_spectrum(z) <= REAL_Z_MARGIN {
            return Err(Error::numerical(format!("z = {} lies on the spectrum of H'", z.re)));
        }
        let v = &self.perp_basis;
        let k = v.ncols();
        let hr = v.adjoint() * &self.h * v - CMat::identity(k, k) * z;
        let inv = linalg::inverse(&hr)?;
        Ok(v * inv * v.adjoint())
    }
}

#[derive(Debug, Clone)]
pub struct GrushinBlocks {
    pub z: C64,
    pub e: CMat,
    pub e_plus: CMat,
    pub e_minus: CMat,
    pub e_h: CMat,
}

pub fn build_blocks(setup: &ReductionSetup, z: C64) -> Result<GrushinBlocks> {
    let rp = setup.reduced_resolvent(z)?;
    let h = &setup.h;
    let s = &setup.s;
    let n = setup.dim();
    let hs = h * s;
    let e_plus = s - &rp * &hs;
    let e_minus = s.adjoint() - s.adjoint() * h * &rp;
    let inner = CMat::identity(n, n) * z - h + h * &rp * h;
    let e_h = s.adjoint() * inner * s;
    Ok(GrushinBlocks { z, e: rp, e_plus, e_minus, e_h })
}

/// E − E₊ E_H⁻¹ E₋.
pub fn resolvent_via_grushin(blocks: &GrushinBlocks) -> Result<CMat> {
    let cond = linalg::condition_number(&blocks.e_h)?;
    if cond > 1e12 {
        return Err(Error::numerical(format!("E_H is numerically singular (condition {cond:.2e})")));
    }
    let x = linalg::solve(&blocks.e_h, &blocks.e_minus)?;
    Ok(&blocks.e - &blocks.e_plus * x)
}

/// Smallest eigenvalue of Im E_H(z)/Im z − S*S.
pub fn herglotz_margin(setup: &ReductionSetup, blocks: &GrushinBlocks) -> Result<f64> {
    if blocks.z.im == 0.0 {
        return Err(Error::invalid("Herglotz margin needs Im z ≠ 0"));
    }
    let im = linalg::imaginary_part(&blocks.e_h).unscale(blocks.z.im);
    let sts = setup.s.adjoint() * &setup.s;
    Ok(linalg::min_eig_hermitian(&(im - sts)))
}

/// ‖E_H(z)* − E_H(z̄)‖.
pub fn adjoint_defect(setup: &ReductionSetup, z: C64) -> Result<f64> {
    let a = build_blocks(setup, z)?.e_h;
    let b = build_blocks(setup, z.conj())?.e_h;
    Ok((a.adjoint() - b).norm())
}

/// ‖(SS*)⁺S − S(S*S)⁻¹‖, with the pseudo-inverse acting on ran S.
pub fn t_identity_defect(setup: &ReductionSetup) -> Result<f64> {
    let ssa = &setup.s * setup.s.adjoint();
    let left = linalg::pinv(&ssa, RANK_CUT)? * &setup.s;
    Ok((left - &setup.t).norm())
}

/// B(z) = [[ΠHR', Π'HT], [0, 0]] on G ⊕ H_aux.
pub fn b_matrix(setup: &ReductionSetup, z: C64) -> Result<CMat> {
    let rp = setup.reduced_resolvent(z)?;
    let n = setup.dim();
    let k = setup.aux_dim();
    let mut b = CMat::zeros(n + k, n + k);
    b.view_mut((0, 0), (n, n)).copy_from(&(&setup.pi * &setup.h * &rp));
    b.view_mut((0, n), (n, k)).copy_from(&(&setup.pi_perp * &setup.h * &setup.t));
    Ok(b)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct NilpotencyReport {
    pub b_norm: f64,
    pub b_cubed_norm: f64,
}

pub fn check_nilpotent_b(setup: &ReductionSetup, z: C64) -> Result<NilpotencyReport> {
    if z.im == 0.0 {
        return Err(Error::invalid("nilpotency check needs Im z ≠ 0"));
    }
    let b = b_matrix(setup, z)?;
    let b3 = &b * &b * &b;
    Ok(NilpotencyReport { b_norm: linalg::spectral_norm(&b), b_cubed_norm: linalg::spectral_norm(&b3) })
}

/// The Grushin matrix Q(z) = [[R', T], [T*, T*(z − H)T]].
pub fn grushin_inverse_candidate(setup: &ReductionSetup, z: C64) -> Result<CMat> {
    let rp = setup.reduced_resolvent(z)?;
    let n = setup.dim();
    let k = setup.aux_dim();
    let t = &setup.t;
    let mut q = CMat::zeros(n + k, n + k);
    q.view_mut((0, 0), (n, n)).copy_from(&rp);
    q.view_mut((0, n), (n, k)).copy_from(t);
    q.view_mut((n, 0), (k, n)).copy_from(&t.adjoint());
    let zh = CMat::identity(n, n) * z - &setup.h;
    q.view_mut((n, n), (k, k)).copy_from(&(t.adjoint() * zh * t));
    Ok(q)
}

/// ‖H(z)Q(z) − 1 − B(z)‖ with H(z) = [[H − z, S], [S*, 0]].
pub fn grushin_problem_defect(setup: &ReductionSetup, z: C64) -> Result<f64> {
    let n = setup.dim();
    let k = setup.aux_dim();
    let mut hz = CMat::zeros(n + k, n + k);
    hz.view_mut((0, 0), (n, n)).copy_from(&(&setup.h - CMat::identity(n, n) * z));
    hz.view_mut((0, n), (n, k)).copy_from(&setup.s);
    hz.view_mut((n, 0), (k, n)).copy_from(&setup.s.adjoint());
    let q = grushin_inverse_candidate(setup, z)?;
    let b = b_matrix(setup, z)?;
    Ok((hz * q - CMat::identity(n + k, n + k) - b).norm())
}

#[derive(Debug, Clone, Serialize)]
pub struct EigentransformReport {
    pub lambda: f64,
    pub kernel_dim_h: usize,
    pub kernel_dim_eh: usize,
    /// max_j ‖E₊(λ)T*φ_j − φ_j‖
    pub round_trip: f64,
    /// max_j ‖E_H(λ)T*φ_j‖
    pub eh_residual: f64,
    /// rank of T* restricted to ker(H − λ)
    pub image_rank: usize,
}

impl EigentransformReport {
    pub fn is_isomorphism(&self) -> bool {
        self.kernel_dim_h == self.kernel_dim_eh && self.image_rank == self.kernel_dim_h
    }
}

pub fn eigentransform(setup: &ReductionSetup, lambda: f64) -> Result<EigentransformReport> {
    if setup.distance_to_reduced_spectrum(c(lambda)) <= REAL_Z_MARGIN {
        return Err(Error::invalid(format!("λ = {lambda} lies in σ(H')")));
    }
    let n = setup.dim();
    let shifted = &setup.h - CMat::identity(n, n) * c(lambda);
    let ker = linalg::null_space(&shifted, 1e-10)?.basis;
    let blocks = build_blocks(setup, c(lambda))?;
    // E_H(λ) can vanish identically (rank S = multiplicity), so the cutoff is
    // set by the scale of S*(λ − H)S rather than by ‖E_H(λ)‖.
    let scale = linalg::spectral_norm(&(setup.s.adjoint() * &setup.s)) * (linalg::spectral_norm(&setup.h) + lambda.abs()).max(1.0);
    let eh_sv = linalg::svd(&blocks.e_h)?;
    let eh_kernel_dim = eh_sv.s.iter().filter(|&&x| x <= 1e-10 * scale).count();
    let tstar = setup.t.adjoint();
    let f = &tstar * &ker;
    let mut round_trip: f64 = 0.0;
    let mut eh_residual: f64 = 0.0;
    for j in 0..ker.ncols() {
        let fj = f.column(j);
        round_trip = round_trip.max((&blocks.e_plus * fj - ker.column(j)).norm());
        eh_residual = eh_residual.max((&blocks.e_h * fj).norm());
    }
    let image_rank = if ker.ncols() == 0 { 0 } else { linalg::rank(&f, 1e-10)? };
    Ok(EigentransformReport {
        lambda,
        kernel_dim_h: ker.ncols(),
        kernel_dim_eh: eh_kernel_dim,
        round_trip,
        eh_residual,
        image_rank,
    })
}

#[derive(Debug, Clone)]
pub struct MultipleClusterSetup {
    pub setup: ReductionSetup,
    /// dim ker(S*S) of the unrestricted S = (S₁, S₂).
    pub overlap_dim: usize,
}

/// Build the reduction for S = (S₁, S₂); overlapping ranges are handled by
/// restricting to the orthogonal complement of ker(S*S).
pub fn multiple_cluster_setup(h: CMat, s1: &CMat, s2: &CMat) -> Result<MultipleClusterSetup> {
    for (name, sj) in [("S₁", s1), ("S₂", s2)] {
        let g = sj.adjoint() * sj;
        if (g - CMat::identity(sj.ncols(), sj.ncols())).norm() > 1e-10 {
            return Err(Error::invalid(format!("columns of {name} are not orthonormal")));
        }
    }
    if s1.nrows() != s2.nrows() {
        return Err(Error::invalid("S₁ and S₂ map into different spaces"));
    }
    let mut s = CMat::zeros(s1.nrows(), s1.ncols() + s2.ncols());
    s.view_mut((0, 0), s1.shape()).copy_from(s1);
    s.view_mut((0, s1.ncols()), s2.shape()).copy_from(s2);
    let gram = s.adjoint() * &s;
    let (vals, vecs) = linalg::eigh(&gram);
    let top = vals.last().copied().unwrap_or(0.0);
    let keep: Vec<usize> = (0..vals.len()).filter(|&k| vals[k] > RANK_CUT * top).collect();
    let overlap_dim = vals.len() - keep.len();
    let s_r = if overlap_dim == 0 {
        s
    } else {
        let cols: Vec<_> = keep.iter().map(|&k| vecs.column(k).into_owned()).collect();
        &s * CMat::from_columns(&cols)
    };
    Ok(MultipleClusterSetup { setup: ReductionSetup::new(h, s_r)?, overlap_dim })
}

/// Random Hermitian matrix with entries of unit scale.
pub fn random_hermitian<R: Rng>(rng: &mut R, n: usize) -> CMat {
    let a = CMat::from_fn(n, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    linalg::hermitian_part(&a)
}

pub fn random_matrix<R: Rng>(rng: &mut R, n: usize, k: usize) -> CMat {
    CMat::from_fn(n, k, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

/// Hermitian matrix with eigenvalue `lambda` of the given multiplicity and
/// the remaining spectrum at distance ≥ 0.5 from it.
pub fn planted_hermitian<R: Rng>(rng: &mut R, n: usize, lambda: f64, multiplicity: usize) -> CMat {
    let q = linalg::range_basis(&random_matrix(rng, n, n), 1e-14).expect("svd");
    let mut d = Vec::with_capacity(n);
    for k in 0..n {
        if k < multiplicity {
            d.push(lambda);
        } else {
            let off: f64 = rng.random_range(0.5..3.0);
            d.push(if rng.random_bool(0.5) { lambda + off } else { lambda - off });
        }
    }
    let dm = CMat::from_diagonal(&crate::linalg::CVec::from_iterator(n, d.into_iter().map(c)));
    let h = &q * dm * q.adjoint();
    linalg::hermitian_part(&h)
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub trials: usize,
    pub evaluations: usize,
    pub max_identity_residual: f64,
    pub min_herglotz_margin: f64,
    pub max_b_cubed: f64,
    pub max_adjoint_defect: f64,
    pub max_t_identity_defect: f64,
}

/// Randomised identity suite: random (H, S) with dim ≤ `max_dim`,
/// rank(S) ≤ `max_rank`, `nz` nonreal spectral parameters each.
pub fn run_suite(seed: u64, trials: usize, max_dim: usize, max_rank: usize, nz: usize) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = SuiteReport {
        seed,
        trials,
        evaluations: 0,
        max_identity_residual: 0.0,
        min_herglotz_margin: f64::INFINITY,
        max_b_cubed: 0.0,
        max_adjoint_defect: 0.0,
        max_t_identity_defect: 0.0,
    };
    for _ in 0..trials {
        let n = rng.random_range((max_rank + 2).min(max_dim)..=max_dim);
        let k = rng.random_range(1..=max_rank.min(n - 1));
        let h = random_hermitian(&mut rng, n);
        let s = random_matrix(&mut rng, n, k);
        let setup = ReductionSetup::new(h, s)?;
        rep.max_t_identity_defect = rep.max_t_identity_defect.max(t_identity_defect(&setup)?);
        for _ in 0..nz {
            let z = C64::new(rng.random_range(-3.0..3.0), rng.random_range(0.05..2.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 });
            let blocks = build_blocks(&setup, z)?;
            let via = resolvent_via_grushin(&blocks)?;
            let direct = linalg::inverse(&(&setup.h - CMat::identity(n, n) * z))?;
            let rel = linalg::spectral_norm(&(&via - &direct)) / linalg::spectral_norm(&direct);
            rep.max_identity_residual = rep.max_identity_residual.max(rel);
            rep.min_herglotz_margin = rep.min_herglotz_margin.min(herglotz_margin(&setup, &blocks)?);
            rep.max_b_cubed = rep.max_b_cubed.max(check_nilpotent_b(&setup, z)?.b_cubed_norm);
            rep.max_adjoint_defect = rep.max_adjoint_defect.max(adjoint_defect(&setup, z)?);
            rep.evaluations += 1;
        }
    }
    Ok(rep)
}
