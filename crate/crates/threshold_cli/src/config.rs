//! Scenario files: one TOML document, one section per subcommand. Every
//! section is optional; missing sections fall back to the canonical fixtures.

use std::path::Path;

use serde::Deserialize;

use threshold_toolkit::critical_channel::{AngularOperator, AngularPotential};
use threshold_toolkit::free_resolvent::RadialGrid;
use threshold_toolkit::model_setup::{ChannelSpec, Nucleus, ParticleSystem};
use threshold_toolkit::resolvent_expansion::EigenDecay;
use threshold_toolkit::scattering_threshold::{BoundaryValue, ReducedFlowState};
use threshold_toolkit::threshold_classifier::EffectiveOperator;
use threshold_toolkit::{fixtures, Error};

use crate::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Optional, checked against the subcommand when present.
    pub command: Option<String>,
    pub seed: Option<u64>,
    pub system: Option<SystemConfig>,
    #[serde(default)]
    pub channels: Vec<ChannelSpec>,
    #[serde(default)]
    pub grushin: GrushinConfig,
    #[serde(default)]
    pub operator: OperatorConfig,
    #[serde(default)]
    pub angular: AngularConfig,
    #[serde(default)]
    pub expand: ExpandConfig,
    #[serde(default)]
    pub scatter: ScatterConfig,
    #[serde(default)]
    pub flow: FlowConfig,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub masses: Vec<f64>,
    pub charges: Vec<f64>,
    #[serde(default = "three")]
    pub dim: usize,
    pub nuclei: Option<Vec<Nucleus>>,
}

fn three() -> usize {
    3
}

impl SystemConfig {
    pub fn build(&self) -> Result<ParticleSystem, Error> {
        let sys = ParticleSystem::new(self.masses.clone(), self.charges.clone(), self.dim)?;
        match &self.nuclei {
            Some(n) => sys.with_nuclei(n.clone()),
            None => Ok(sys),
        }
    }
}

/// Three particles with charges (+1, −1, 0) in three dimensions.
pub fn default_system() -> SystemConfig {
    SystemConfig { masses: vec![1.0, 1.0, 1.0], charges: vec![1.0, -1.0, 0.0], dim: 3, nuclei: None }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GrushinConfig {
    pub trials: usize,
    pub max_dim: usize,
    pub max_rank: usize,
    pub z_per_trial: usize,
    pub identity_tol: f64,
    pub herglotz_tol: f64,
    pub nilpotency_tol: f64,
}

impl Default for GrushinConfig {
    fn default() -> Self {
        GrushinConfig {
            trials: 50,
            max_dim: 40,
            max_rank: 5,
            z_per_trial: 5,
            identity_tol: 1e-10,
            herglotz_tol: 1e-12,
            nilpotency_tol: 1e-12,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Cells inside the well radius; kinds without a well use inner + outer
    /// log-spaced nodes.
    pub inner: usize,
    pub outer: usize,
    pub r_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    Zero,
    SquareWell,
    CriticalSWell,
    CriticalPWell,
    MixedTwoChannel,
    RankOne,
    RegularWell,
    Tabulated,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OperatorConfig {
    pub kind: OperatorKind,
    pub radius: f64,
    pub depth: f64,
    /// Depth as a fraction of the s-wave critical depth (regular_well).
    pub fraction: f64,
    /// Gaussian exponent of the rank-one profile.
    pub alpha: f64,
    pub sectors: Vec<usize>,
    pub channels: usize,
    /// Weight exponent s of L²_{−s}.
    pub weight: Option<f64>,
    /// (r, V(r)) pairs, linearly interpolated and zero beyond the last point.
    pub samples: Vec<[f64; 2]>,
    pub grid: Option<GridConfig>,
}

impl Default for OperatorConfig {
    fn default() -> Self {
        OperatorConfig {
            kind: OperatorKind::Zero,
            radius: 1.0,
            depth: 1.0,
            fraction: 0.5,
            alpha: 1.0,
            sectors: vec![0],
            channels: 1,
            weight: None,
            samples: vec![],
            grid: None,
        }
    }
}

impl OperatorConfig {
    fn grid(&self) -> Result<RadialGrid, Error> {
        match (&self.grid, self.kind) {
            (Some(g), OperatorKind::RankOne | OperatorKind::Zero | OperatorKind::Tabulated) => {
                RadialGrid::log_spaced(1e-3, g.r_max, g.inner + g.outer)
            }
            (Some(g), _) => fixtures::well_grid(self.radius, g.r_max, g.inner, g.outer),
            (None, OperatorKind::RankOne | OperatorKind::Zero | OperatorKind::Tabulated) => Ok(RadialGrid::default_grid()),
            (None, _) => fixtures::default_well_grid(self.radius),
        }
    }

    pub fn build(&self) -> Result<EffectiveOperator, Error> {
        if self.sectors.is_empty() {
            return Err(Error::invalid("operator.sectors must not be empty"));
        }
        let grid = self.grid()?;
        let mut op = match self.kind {
            OperatorKind::Zero => EffectiveOperator::zero(grid, self.channels.max(1), self.sectors.clone()),
            OperatorKind::SquareWell => fixtures::square_well(&grid, self.depth, self.radius, self.sectors.clone())?,
            OperatorKind::CriticalSWell => fixtures::critical_s_well(&grid, self.radius)?,
            OperatorKind::CriticalPWell => fixtures::critical_p_well(&grid, self.radius)?,
            OperatorKind::MixedTwoChannel => fixtures::mixed_two_channel(&grid, self.radius)?,
            OperatorKind::RankOne => fixtures::rank_one_resonance(&grid, self.alpha)?,
            OperatorKind::RegularWell => fixtures::regular_well(&grid, self.radius, self.fraction)?,
            OperatorKind::Tabulated => {
                let values = interpolate(&self.samples, &grid.nodes)?;
                EffectiveOperator::local_scalar(grid, &values, self.sectors.clone())?
            }
        };
        if let Some(s) = self.weight {
            op.weight = s;
        }
        op.validate()?;
        Ok(op)
    }
}

fn interpolate(samples: &[[f64; 2]], nodes: &[f64]) -> Result<Vec<f64>, Error> {
    if samples.len() < 2 {
        return Err(Error::invalid("operator.samples needs at least two (r, V) points"));
    }
    if samples.windows(2).any(|w| !(w[1][0] > w[0][0])) || samples[0][0] < 0.0 {
        return Err(Error::invalid("operator.samples radii must be nonnegative and strictly increasing"));
    }
    Ok(nodes
        .iter()
        .map(|&r| {
            if r <= samples[0][0] {
                return samples[0][1];
            }
            match samples.windows(2).find(|w| r <= w[1][0]) {
                Some(w) => {
                    let t = (r - w[0][0]) / (w[1][0] - w[0][0]);
                    w[0][1] + t * (w[1][1] - w[0][1])
                }
                None => 0.0,
            }
        })
        .collect())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AngularConfig {
    pub n: usize,
    pub channels: usize,
    pub q: Option<AngularPotential>,
}

impl Default for AngularConfig {
    fn default() -> Self {
        AngularConfig { n: 3, channels: 2, q: None }
    }
}

impl AngularConfig {
    pub fn build(&self) -> AngularOperator {
        match &self.q {
            Some(q) => AngularOperator { n: self.n, channels: self.channels, q: q.clone() },
            None => AngularOperator::free(self.n, self.channels),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExpandConfig {
    /// Spectral moduli |z| along the ray; defaults to 1e−10..1e−6.
    pub moduli: Option<Vec<f64>>,
    pub eigen_decay: Option<EigenDecay>,
    /// Power p of the test vector r^{ℓ+p} e^{−r²}.
    pub test_power: i32,
    pub power_tol: f64,
}

impl Default for ExpandConfig {
    fn default() -> Self {
        ExpandConfig { moduli: None, eigen_decay: None, test_power: 1, power_tol: 0.02 }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScatterConfig {
    pub incoming: usize,
    pub energies: Vec<f64>,
    pub boundary_value: BoundaryValue,
}

impl Default for ScatterConfig {
    fn default() -> Self {
        ScatterConfig {
            incoming: 0,
            energies: (0..9).map(|k| 10f64.powf(-6.0 + 0.25 * k as f64)).collect(),
            boundary_value: BoundaryValue::Richardson,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowConfig {
    pub initial: ReducedFlowState,
    pub tau_end: f64,
    pub rtol: f64,
    pub atol: f64,
    /// Spacing of the rows written to the trajectory file.
    pub sample_every: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            initial: ReducedFlowState { x_hat: vec![1.0, 0.0, 0.0], c_bar: vec![0.0, 1.0, 0.0], b: 0.0, rho: 1.0 },
            tau_end: 20.0,
            rtol: 1e-10,
            atol: 1e-12,
            sample_every: 0.0,
        }
    }
}
