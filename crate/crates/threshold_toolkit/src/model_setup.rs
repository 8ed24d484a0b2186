//! Cluster geometry of many-body systems: mass-weighted configuration space,
//! the lattice of cluster decompositions with their projectors, and the
//! multipole classification of effective inter-cluster potentials.

use std::collections::BTreeSet;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{gauss_legendre, sphere_rule};

/// Relative tolerance for the exact-in-charges zero tests.
pub const CHARGE_ZERO_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Nucleus {
    pub position: Vec<f64>,
    pub charge: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleSystem {
    pub masses: Vec<f64>,
    pub charges: Vec<f64>,
    pub dim: usize,
    /// Fixed (infinite-mass) nuclei; when present the center of mass is not
    /// removed.
    #[serde(default)]
    pub nuclei: Option<Vec<Nucleus>>,
}

impl ParticleSystem {
    pub fn new(masses: Vec<f64>, charges: Vec<f64>, dim: usize) -> Result<Self> {
        let s = ParticleSystem { masses, charges, dim, nuclei: None };
        s.validate()?;
        Ok(s)
    }

    pub fn with_nuclei(mut self, nuclei: Vec<Nucleus>) -> Result<Self> {
        self.nuclei = Some(nuclei);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 1 {
            return Err(Error::invalid("particle dimension must be at least 1"));
        }
        if self.masses.iter().any(|&m| !(m > 0.0) || !m.is_finite()) {
            return Err(Error::invalid("all masses must be positive and finite"));
        }
        if self.charges.len() != self.masses.len() {
            return Err(Error::invalid("charges and masses differ in length"));
        }
        let min_n = if self.nuclei.is_some() { 1 } else { 2 };
        if self.masses.len() < min_n {
            return Err(Error::invalid(format!("need at least {min_n} particles")));
        }
        if self.masses.len() > 7 {
            return Err(Error::invalid("lattice enumeration is limited to 7 particles"));
        }
        if let Some(nuc) = &self.nuclei {
            if nuc.iter().any(|n| n.position.len() != self.dim) {
                return Err(Error::invalid("nucleus position has wrong dimension"));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn fixed_nuclei(&self) -> bool {
        self.nuclei.is_some()
    }

    /// Total dimension n·N of the particle coordinates.
    pub fn full_dim(&self) -> usize {
        self.dim * self.len()
    }

    /// Diagonal of the metric q(x) = Σ 2 m_j |x_j|².
    pub fn metric_diag(&self) -> DVector<f64> {
        DVector::from_iterator(self.full_dim(), self.masses.iter().flat_map(|&m| std::iter::repeat_n(2.0 * m, self.dim)))
    }

    pub fn q(&self, x: &DVector<f64>) -> f64 {
        self.metric_diag().iter().zip(x.iter()).map(|(m, v)| m * v * v).sum()
    }

    /// Remove the center of mass (no-op with fixed nuclei).
    pub fn remove_center_of_mass(&self, x: &DVector<f64>) -> DVector<f64> {
        if self.fixed_nuclei() {
            return x.clone();
        }
        let n = self.dim;
        let mt: f64 = self.masses.iter().sum();
        let mut com = vec![0.0; n];
        for (j, &m) in self.masses.iter().enumerate() {
            for d in 0..n {
                com[d] += m * x[j * n + d] / mt;
            }
        }
        let mut y = x.clone();
        for j in 0..self.len() {
            for d in 0..n {
                y[j * n + d] -= com[d];
            }
        }
        y
    }

    /// Columns form a q-orthonormal basis of the configuration space X.
    pub fn configuration_basis(&self) -> DMatrix<f64> {
        let nn = self.full_dim();
        let md = self.metric_diag();
        let sqrt_m = md.map(f64::sqrt);
        if self.fixed_nuclei() {
            return DMatrix::from_diagonal(&sqrt_m.map(|v| 1.0 / v));
        }
        // Euclidean complement of M^{1/2}(1 ⊗ e_d), mapped back by M^{-1/2}.
        let mut com = DMatrix::zeros(nn, self.dim);
        for j in 0..self.len() {
            for d in 0..self.dim {
                com[(j * self.dim + d, d)] = sqrt_m[j * self.dim + d];
            }
        }
        let (u, _, _) = crate::linalg::real_svd(&com).expect("svd of the mass direction");
        let p = DMatrix::identity(nn, nn) - &u * u.transpose();
        let basis = real_range(&p, 1e-10);
        let mut b = basis;
        for i in 0..nn {
            let s = 1.0 / sqrt_m[i];
            for k in 0..b.ncols() {
                b[(i, k)] *= s;
            }
        }
        b
    }
}

fn real_range(a: &DMatrix<f64>, rel: f64) -> DMatrix<f64> {
    let (u, sv, _) = crate::linalg::real_svd(a).expect("svd");
    let smax = sv.first().copied().unwrap_or(0.0);
    let cols: Vec<_> = (0..sv.len())
        .filter(|&k| sv[k] > rel * smax.max(f64::MIN_POSITIVE))
        .map(|k| u.column(k).into_owned())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(a.nrows(), 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

fn real_rank(a: &DMatrix<f64>, abs_tol: f64) -> usize {
    if a.is_empty() {
        return 0;
    }
    crate::linalg::real_svd(a).expect("svd").1.iter().filter(|&&s| s > abs_tol).count()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterDecomposition {
    /// Internally constrained clusters (center of mass fixed within the cluster).
    pub clusters: Vec<Vec<usize>>,
    /// Particles attached to the fixed nuclei (fixed-nuclei model only).
    pub nuclear: Vec<usize>,
    /// #a: maximal chain length to the one-cluster decomposition.
    pub size: usize,
    /// π^a in q-orthonormal coordinates of X.
    #[serde(skip)]
    pub internal: DMatrix<f64>,
    /// π_a = 1 − π^a in the same coordinates.
    #[serde(skip)]
    pub external: DMatrix<f64>,
    pub internal_dim: usize,
}

impl ClusterDecomposition {
    pub fn label(&self) -> String {
        let mut s = String::new();
        if !self.nuclear.is_empty() {
            s.push('[');
            for p in &self.nuclear {
                s.push_str(&(p + 1).to_string());
            }
            s.push(']');
        }
        for c in &self.clusters {
            s.push('(');
            for p in c {
                s.push_str(&(p + 1).to_string());
            }
            s.push(')');
        }
        if s.is_empty() {
            s.push_str("amin");
        }
        s
    }

    pub fn cluster_count(&self) -> usize {
        self.clusters.len() + usize::from(!self.nuclear.is_empty())
    }
}

impl fmt::Display for ClusterDecomposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ClusterLattice {
    pub system: ParticleSystem,
    pub decompositions: Vec<ClusterDecomposition>,
    /// order[a][b] ⇔ a ⊂ b (X^a ⊆ X^b).
    pub order: Vec<Vec<bool>>,
    #[serde(skip)]
    pub basis: DMatrix<f64>,
    pub a_max: usize,
    pub a_min: usize,
}

fn set_partitions(items: &[usize]) -> Vec<Vec<Vec<usize>>> {
    if items.is_empty() {
        return vec![vec![]];
    }
    let first = items[0];
    let mut out = Vec::new();
    for part in set_partitions(&items[1..]) {
        for i in 0..part.len() {
            let mut p = part.clone();
            p[i].insert(0, first);
            out.push(p);
        }
        let mut p = part.clone();
        p.insert(0, vec![first]);
        out.push(p);
    }
    out
}

fn generating_vectors(sys: &ParticleSystem, clusters: &[Vec<usize>], nuclear: &[usize]) -> Vec<DVector<f64>> {
    let n = sys.dim;
    let nn = sys.full_dim();
    let mut gens = Vec::new();
    for c in clusters.iter().filter(|c| c.len() >= 2) {
        let mc: f64 = c.iter().map(|&j| sys.masses[j]).sum();
        for &i in c {
            for d in 0..n {
                let mut v = DVector::zeros(nn);
                for &j in c {
                    v[j * n + d] -= sys.masses[j] / mc;
                }
                v[i * n + d] += 1.0;
                gens.push(v);
            }
        }
    }
    for &i in nuclear {
        for d in 0..n {
            let mut v = DVector::zeros(nn);
            v[i * n + d] = 1.0;
            gens.push(v);
        }
    }
    gens
}

/// Enumerate all cluster decompositions with projectors, ordering and #a.
pub fn build_lattice(system: &ParticleSystem) -> Result<ClusterLattice> {
    system.validate()?;
    let basis = system.configuration_basis();
    let md = system.metric_diag();
    let d = basis.ncols();
    let particles: Vec<usize> = (0..system.len()).collect();

    let mut raw: Vec<(Vec<Vec<usize>>, Vec<usize>)> = Vec::new();
    if system.fixed_nuclei() {
        for mask in 0u32..(1 << system.len()) {
            let nuclear: Vec<usize> = particles.iter().copied().filter(|&j| mask & (1 << j) != 0).collect();
            let rest: Vec<usize> = particles.iter().copied().filter(|&j| mask & (1 << j) == 0).collect();
            for part in set_partitions(&rest) {
                raw.push((part, nuclear.clone()));
            }
        }
    } else {
        for part in set_partitions(&particles) {
            raw.push((part, vec![]));
        }
    }

    let mut decs = Vec::with_capacity(raw.len());
    for (mut clusters, nuclear) in raw {
        clusters.retain(|c| c.len() >= 2);
        for c in clusters.iter_mut() {
            c.sort_unstable();
        }
        clusters.sort();
        let gens = generating_vectors(system, &clusters, &nuclear);
        let internal = if gens.is_empty() {
            DMatrix::zeros(d, d)
        } else {
            // coordinates ξ = Bᵀ M v
            let mut y = DMatrix::zeros(d, gens.len());
            for (k, g) in gens.iter().enumerate() {
                let mg = g.component_mul(&md);
                y.set_column(k, &(basis.transpose() * mg));
            }
            let r = real_range(&y, 1e-10);
            &r * r.transpose()
        };
        let external = DMatrix::identity(d, d) - &internal;
        let internal_dim = internal.trace().round() as usize;
        decs.push(ClusterDecomposition { clusters, nuclear, size: 0, internal, external, internal_dim });
    }

    let na = decs.len();
    let mut order = vec![vec![false; na]; na];
    for a in 0..na {
        for b in 0..na {
            let pa = &decs[a].internal;
            let pb = &decs[b].internal;
            order[a][b] = (pb * pa - pa).norm() < 1e-9;
        }
    }
    let a_max = (0..na).max_by_key(|&a| decs[a].internal_dim).expect("nonempty");
    let a_min = (0..na).min_by_key(|&a| decs[a].internal_dim).expect("nonempty");

    // Longest chain to a_max, processed by decreasing subspace dimension.
    let mut idx: Vec<usize> = (0..na).collect();
    idx.sort_by_key(|&a| std::cmp::Reverse(decs[a].internal_dim));
    let mut len = vec![0usize; na];
    for &a in &idx {
        len[a] = if a == a_max {
            1
        } else {
            (0..na)
                .filter(|&b| b != a && order[a][b] && decs[b].internal_dim > decs[a].internal_dim)
                .map(|b| len[b] + 1)
                .max()
                .unwrap_or(1)
        };
    }
    for (a, dec) in decs.iter_mut().enumerate() {
        dec.size = len[a];
    }
    Ok(ClusterLattice { system: system.clone(), decompositions: decs, order, basis, a_max, a_min })
}

impl ClusterLattice {
    pub fn find(&self, clusters: &[Vec<usize>]) -> Option<usize> {
        let mut want: Vec<Vec<usize>> = clusters.iter().filter(|c| c.len() >= 2).cloned().collect();
        for c in want.iter_mut() {
            c.sort_unstable();
        }
        want.sort();
        self.decompositions.iter().position(|d| d.nuclear.is_empty() && d.clusters == want)
    }

    pub fn two_cluster(&self) -> Vec<usize> {
        (0..self.decompositions.len()).filter(|&a| self.decompositions[a].size == 2).collect()
    }

    /// Coordinates of x (full particle coordinates) in the q-orthonormal basis of X.
    pub fn coordinates(&self, x: &DVector<f64>) -> DVector<f64> {
        let y = self.system.remove_center_of_mass(x);
        let my = y.component_mul(&self.system.metric_diag());
        self.basis.transpose() * my
    }

    /// The orthogonal splitting x = x^a + x_a, returned in full coordinates.
    pub fn project(&self, x: &DVector<f64>, a: usize) -> (DVector<f64>, DVector<f64>) {
        let xi = self.coordinates(x);
        let dec = &self.decompositions[a];
        let upper = &self.basis * (&dec.internal * &xi);
        let lower = &self.basis * (&dec.external * &xi);
        (upper, lower)
    }

    /// Check ran(π^b π^a) ∈ {0, ran π^b} for every two-cluster a and every
    /// atomic b ⊄ a. Returns the offending pairs.
    pub fn geometric_violations(&self) -> Vec<(usize, usize)> {
        let atom_size = self.decompositions[self.a_min].size.saturating_sub(1);
        let mut bad = Vec::new();
        for a in self.two_cluster() {
            for b in 0..self.decompositions.len() {
                if self.decompositions[b].size != atom_size || self.order[b][a] {
                    continue;
                }
                let pb = &self.decompositions[b].internal;
                let pa = &self.decompositions[a].internal;
                let r = real_rank(&(pb * pa), 1e-9);
                let rb = self.decompositions[b].internal_dim;
                if r != 0 && r != rb {
                    bad.push((a, b));
                }
            }
        }
        bad
    }
}

/// Hydrogen-like orbitals in units of the Bohr radius.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orbital {
    S1,
    S2,
    Px2,
    Py2,
    Pz2,
}

impl Orbital {
    pub fn eval(self, z: f64, y: [f64; 3]) -> f64 {
        let r = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
        let pi = std::f64::consts::PI;
        match self {
            Orbital::S1 => (z.powi(3) / pi).sqrt() * (-z * r).exp(),
            Orbital::S2 => (z.powi(3) / (32.0 * pi)).sqrt() * (2.0 - z * r) * (-z * r / 2.0).exp(),
            Orbital::Px2 => (z.powi(5) / (32.0 * pi)).sqrt() * y[0] * (-z * r / 2.0).exp(),
            Orbital::Py2 => (z.powi(5) / (32.0 * pi)).sqrt() * y[1] * (-z * r / 2.0).exp(),
            Orbital::Pz2 => (z.powi(5) / (32.0 * pi)).sqrt() * y[2] * (-z * r / 2.0).exp(),
        }
    }
}

/// Cluster bound-state data sufficient for the multipole expansion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundStateDescriptor {
    /// Internal charge moments ⟨φ_i, Q̃ φ_j⟩ supplied directly (m×m×n).
    Moments { dipoles: Vec<Vec<Vec<f64>>>, radius: f64 },
    /// Superpositions of hydrogen-like orbitals of the relative coordinate
    /// y = x_first − x_second of a two-particle cluster (or electron minus
    /// the first nucleus in the fixed-nuclei model).
    Hydrogenic { z_eff: f64, states: Vec<Vec<(Orbital, f64)>> },
    /// Wavefunctions tabulated at quadrature points of the relative coordinate.
    Tabulated { points: Vec<[f64; 3]>, weights: Vec<f64>, values: Vec<Vec<f64>>, outer_radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub particles: Vec<usize>,
    pub bound_state: BoundStateDescriptor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    /// Two clusters; in the fixed-nuclei model the first is the cluster
    /// attached to the nuclei and the second the escaping particle.
    pub clusters: Vec<ClusterSpec>,
    pub lambda0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MultipoleCase {
    Case1,
    Case2,
    Case3,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectiveMultipole {
    pub coulomb: f64,
    /// Dipole coefficients as an m_a × m_a matrix of vectors in X_a.
    pub dipole: Vec<Vec<Vec<f64>>>,
    pub remainder_order: u32,
    pub case: MultipoleCase,
    pub multiplicity: usize,
}

impl EffectiveMultipole {
    /// Diagonal dipole of the first channel state.
    pub fn leading_dipole(&self) -> &[f64] {
        &self.dipole[0][0]
    }

    pub fn dipole_max(&self) -> f64 {
        self.dipole.iter().flatten().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

struct Moments {
    /// ⟨φ_i, y φ_j⟩ or ⟨φ_i, Q̃ φ_j⟩ depending on `relative`.
    dip: Vec<Vec<Vec<f64>>>,
    radius: f64,
    relative: bool,
}

fn hydrogenic_moments(z: f64, states: &[Vec<(Orbital, f64)>]) -> Result<Moments> {
    if !(z > 0.0) {
        return Err(Error::invalid("effective nuclear charge must be positive"));
    }
    let rmax = 60.0 / z;
    let radial = gauss_legendre(160, 0.0, rmax);
    let ang = sphere_rule(8);
    let m = states.len();
    let mut gram = vec![vec![0.0; m]; m];
    let mut dip = vec![vec![vec![0.0; 3]; m]; m];
    let mut r2 = 0.0;
    for &(r, wr) in &radial {
        for &(t, p, wa) in &ang {
            let y = [r * t.sin() * p.cos(), r * t.sin() * p.sin(), r * t.cos()];
            let w = wr * wa * r * r;
            let vals: Vec<f64> = states.iter().map(|s| s.iter().map(|(o, a)| a * o.eval(z, y)).sum()).collect();
            for i in 0..m {
                for j in 0..m {
                    let pij = w * vals[i] * vals[j];
                    gram[i][j] += pij;
                    for d in 0..3 {
                        dip[i][j][d] += pij * y[d];
                    }
                }
                if i == 0 {
                    r2 += w * vals[0] * vals[0] * r * r;
                }
            }
        }
    }
    check_orthonormal(&gram)?;
    Ok(Moments { dip, radius: r2.sqrt(), relative: true })
}

fn tabulated_moments(points: &[[f64; 3]], weights: &[f64], values: &[Vec<f64>], outer: f64) -> Result<Moments> {
    if points.len() != weights.len() || values.iter().any(|v| v.len() != points.len()) {
        return Err(Error::invalid("tabulated bound state has inconsistent lengths"));
    }
    let m = values.len();
    let mut gram = vec![vec![0.0; m]; m];
    let mut dip = vec![vec![vec![0.0; 3]; m]; m];
    let mut shell = 0.0;
    let mut r2 = 0.0;
    for (k, (y, &w)) in points.iter().zip(weights).enumerate() {
        let r = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
        for i in 0..m {
            for j in 0..m {
                let pij = w * values[i][k] * values[j][k];
                gram[i][j] += pij;
                for d in 0..3 {
                    dip[i][j][d] += pij * y[d];
                }
            }
            let p = w * values[i][k] * values[i][k];
            if r > 0.9 * outer {
                shell += p;
            }
            if i == 0 {
                r2 += p * r * r;
            }
        }
    }
    if shell > 1e-8 {
        return Err(Error::numerical(format!(
            "tabulated state carries weight {shell:.2e} in its outer shell; grid extent is insufficient for moments"
        )));
    }
    check_orthonormal(&gram)?;
    Ok(Moments { dip, radius: r2.sqrt(), relative: true })
}

fn check_orthonormal(gram: &[Vec<f64>]) -> Result<()> {
    for (i, row) in gram.iter().enumerate() {
        for (j, &g) in row.iter().enumerate() {
            let want = if i == j { 1.0 } else { 0.0 };
            if (g - want).abs() > 1e-6 {
                return Err(Error::invalid(format!("bound states not orthonormal: gram[{i}][{j}] = {g:.3e}")));
            }
        }
    }
    Ok(())
}

fn moments_of(desc: &BoundStateDescriptor) -> Result<Moments> {
    match desc {
        BoundStateDescriptor::Moments { dipoles, radius } => {
            Ok(Moments { dip: dipoles.clone(), radius: *radius, relative: false })
        }
        BoundStateDescriptor::Hydrogenic { z_eff, states } => hydrogenic_moments(*z_eff, states),
        BoundStateDescriptor::Tabulated { points, weights, values, outer_radius } => {
            tabulated_moments(points, weights, values, *outer_radius)
        }
    }
}

/// Internal dipole ⟨Q̃⟩ matrix of a cluster, relative to its center of mass
/// (or absolute electron positions with fixed nuclei).
fn cluster_dipoles(sys: &ParticleSystem, cl: &ClusterSpec, attached: bool) -> Result<(Vec<Vec<Vec<f64>>>, f64)> {
    let mo = moments_of(&cl.bound_state)?;
    if !mo.relative {
        return Ok((mo.dip, mo.radius));
    }
    let n = sys.dim;
    if n != 3 {
        return Err(Error::invalid("closed-form and tabulated states need particle dimension 3"));
    }
    let factor = if attached {
        if cl.particles.len() != 1 {
            return Err(Error::invalid("relative-coordinate states with fixed nuclei describe one electron"));
        }
        sys.charges[cl.particles[0]]
    } else {
        if cl.particles.len() != 2 {
            return Err(Error::invalid("relative-coordinate states describe two-particle clusters"));
        }
        let (e, p) = (cl.particles[0], cl.particles[1]);
        let (me, mp) = (sys.masses[e], sys.masses[p]);
        (sys.charges[e] * mp - sys.charges[p] * me) / (me + mp)
    };
    let mut dip = mo.dip;
    let m = dip.len();
    for i in 0..m {
        for j in 0..m {
            for d in 0..n {
                dip[i][j][d] *= factor;
            }
        }
    }
    if attached {
        // x_e = R_1 + y: add the charge times the first nucleus position on the diagonal.
        let r1 = &sys.nuclei.as_ref().expect("fixed nuclei")[0].position;
        for i in 0..m {
            for d in 0..n {
                dip[i][i][d] += factor * r1[d];
            }
        }
    }
    Ok((dip, mo.radius))
}

fn charge_scale(sys: &ParticleSystem) -> f64 {
    let mut s = sys.charges.iter().fold(0.0f64, |m, q| m.max(q.abs()));
    if let Some(nuc) = &sys.nuclei {
        s = nuc.iter().fold(s, |m, n| m.max(n.charge.abs()));
    }
    if s == 0.0 {
        1.0
    } else {
        s
    }
}

/// Leading multipole structure of the effective inter-cluster potential.
pub fn effective_multipole(sys: &ParticleSystem, channel: &ChannelSpec) -> Result<EffectiveMultipole> {
    sys.validate()?;
    if channel.clusters.len() != 2 {
        return Err(Error::invalid("a channel needs exactly two clusters"));
    }
    let used: BTreeSet<usize> = channel.clusters.iter().flat_map(|c| c.particles.iter().copied()).collect();
    let count: usize = channel.clusters.iter().map(|c| c.particles.len()).sum();
    if used.len() != count || used.iter().any(|&p| p >= sys.len()) {
        return Err(Error::invalid("channel clusters must be disjoint subsets of the particles"));
    }
    let n = sys.dim;
    let cs = charge_scale(sys);
    let q_of = |c: &ClusterSpec| c.particles.iter().map(|&j| sys.charges[j]).sum::<f64>();

    let (coulomb, dipole, radius, neutral_pair) = if let Some(nuc) = &sys.nuclei {
        let (dip1, radius) = cluster_dipoles(sys, &channel.clusters[0], true)?;
        let esc = &channel.clusters[1];
        if esc.particles.len() != 1 {
            return Err(Error::invalid("with fixed nuclei the second cluster is one particle"));
        }
        let qn = sys.charges[esc.particles[0]];
        let qtot = q_of(&channel.clusters[0]) + nuc.iter().map(|x| x.charge).sum::<f64>();
        let mut qncl = vec![0.0; n];
        for x in nuc {
            for d in 0..n {
                qncl[d] += x.charge * x.position[d];
            }
        }
        let m = dip1.len();
        let mut dip = vec![vec![vec![0.0; n]; m]; m];
        for i in 0..m {
            for j in 0..m {
                for d in 0..n {
                    let diag = if i == j { qncl[d] } else { 0.0 };
                    dip[i][j][d] = qn * (dip1[i][j][d] + diag);
                }
            }
        }
        (qn * qtot, dip, radius, false)
    } else {
        let (d1, r1) = cluster_dipoles(sys, &channel.clusters[0], false)?;
        let (d2, r2) = cluster_dipoles(sys, &channel.clusters[1], false)?;
        let q1 = q_of(&channel.clusters[0]);
        let q2 = q_of(&channel.clusters[1]);
        let (m1, m2) = (d1.len(), d2.len());
        let m = m1 * m2;
        let mut dip = vec![vec![vec![0.0; n]; m]; m];
        for i1 in 0..m1 {
            for i2 in 0..m2 {
                for j1 in 0..m1 {
                    for j2 in 0..m2 {
                        for d in 0..n {
                            let a = if i1 == j1 { q1 * d2[i2][j2][d] } else { 0.0 };
                            let b = if i2 == j2 { q2 * d1[i1][j1][d] } else { 0.0 };
                            dip[i1 * m2 + i2][j1 * m2 + j2][d] = a - b;
                        }
                    }
                }
            }
        }
        let zero_q = |q: f64| q.abs() <= CHARGE_ZERO_TOL * cs;
        let neutral_with_vanishing = zero_q(q1) && zero_q(q2) && {
            let vanish = |d: &Vec<Vec<Vec<f64>>>, r: f64| {
                d.iter().flatten().flatten().all(|v| v.abs() <= CHARGE_ZERO_TOL * cs * r.max(1e-300))
            };
            vanish(&d1, r1) || vanish(&d2, r2)
        };
        (q1 * q2, dip, r1.max(r2), neutral_with_vanishing)
    };

    let m = dipole.len();
    let coulomb_zero = coulomb.abs() <= CHARGE_ZERO_TOL * cs * cs;
    let dmax = dipole.iter().flatten().flatten().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let dipole_zero = dmax <= CHARGE_ZERO_TOL * cs * cs * radius.max(1e-300);
    let case = if !coulomb_zero {
        MultipoleCase::Case1
    } else if !dipole_zero {
        MultipoleCase::Case2
    } else {
        MultipoleCase::Case3
    };
    let remainder_order = if case == MultipoleCase::Case3 && neutral_pair { 4 } else { 3 };
    Ok(EffectiveMultipole { coulomb, dipole, remainder_order, case, multiplicity: m })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ChannelClasses {
    /// Attractive Coulombic: Q₁Q₂ < 0.
    pub attractive: Vec<usize>,
    /// Repulsive Coulombic: Q₁Q₂ > 0.
    pub repulsive: Vec<usize>,
    /// Neutral with a nonvanishing r⁻² (dipole) term.
    pub critical_decay: Vec<usize>,
    /// Neutral with O(r⁻³) decay.
    pub fast_decay: Vec<usize>,
}

/// Partition channels sharing one threshold into the four families.
pub fn classify_channels(sys: &ParticleSystem, channels: &[ChannelSpec]) -> Result<ChannelClasses> {
    if let Some(first) = channels.first() {
        let scale = first.lambda0.abs().max(1.0);
        if channels.iter().any(|c| (c.lambda0 - first.lambda0).abs() > 1e-12 * scale) {
            return Err(Error::invalid("channels must share the same threshold"));
        }
    }
    let mut out = ChannelClasses::default();
    for (k, ch) in channels.iter().enumerate() {
        let mp = effective_multipole(sys, ch)?;
        match mp.case {
            MultipoleCase::Case1 if mp.coulomb < 0.0 => out.attractive.push(k),
            MultipoleCase::Case1 => out.repulsive.push(k),
            MultipoleCase::Case2 => out.critical_decay.push(k),
            MultipoleCase::Case3 => out.fast_decay.push(k),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_body_split_is_relative_motion() {
        let sys = ParticleSystem::new(vec![1.0, 1.0], vec![0.0, 0.0], 1).unwrap();
        let lat = build_lattice(&sys).unwrap();
        let a = lat.find(&[vec![0, 1]]).unwrap();
        let x = DVector::from_vec(vec![3.0, 1.0]);
        let (up, low) = lat.project(&x, a);
        assert!((up[0] - 1.0).abs() < 1e-14 && (up[1] + 1.0).abs() < 1e-14);
        assert!(low.norm() < 1e-14);
    }

    #[test]
    fn partitions_are_counted_by_bell_numbers() {
        let items: Vec<usize> = (0..5).collect();
        assert_eq!(set_partitions(&items).len(), 52);
    }

    #[test]
    fn orbital_norms() {
        let m = hydrogenic_moments(1.0, &[vec![(Orbital::S1, 1.0)], vec![(Orbital::Pz2, 1.0)]]).unwrap();
        assert!(m.dip[0][0].iter().all(|v| v.abs() < 1e-12));
    }
}
