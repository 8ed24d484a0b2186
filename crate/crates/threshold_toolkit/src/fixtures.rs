//! Effective operators with known threshold behaviour.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::free_resolvent::{partial_wave_g0, RadialGrid};
use crate::linalg::{self, c, CMat, RMat};
use crate::threshold_classifier::{sector_matrix, EffectiveOperator, NonlocalBlock};

/// Grid with the well edge `radius` as a node: `inner` uniform cells on
/// [0, a] and `outer` uniform cells on [a, r_max].
pub fn well_grid(radius: f64, r_max: f64, inner: usize, outer: usize) -> Result<RadialGrid> {
    RadialGrid::piecewise_uniform(&[(radius, inner), (r_max, outer)])
}

/// Default well grid: 200 cells inside, 200 outside up to 60.
pub fn default_well_grid(radius: f64) -> Result<RadialGrid> {
    well_grid(radius, 60.0f64.max(4.0 * radius), 200, 200)
}

fn well_values(grid: &RadialGrid, depth: f64, radius: f64) -> Vec<f64> {
    let r = &grid.nodes;
    (0..r.len())
        .map(|i| {
            if (r[i] - radius).abs() <= 1e-12 * radius {
                // the trapezoid cell to the left lies inside the well
                let left = if i == 0 { r[0] } else { r[i] - r[i - 1] };
                let right = if i + 1 < r.len() { r[i + 1] - r[i] } else { 0.0 };
                -depth * left / (left + right)
            } else if r[i] < radius {
                -depth
            } else {
                0.0
            }
        })
        .collect()
}

/// Attractive square well −depth·1_{r<a}. The edge node value is weighted
/// so that the trapezoid rule integrates the jump exactly.
pub fn square_well(grid: &RadialGrid, depth: f64, radius: f64, sectors: Vec<usize>) -> Result<EffectiveOperator> {
    if !(radius > 0.0) {
        return Err(Error::invalid("well radius must be positive"));
    }
    EffectiveOperator::local_scalar(grid.clone(), &well_values(grid, depth, radius), sectors)
}

/// m decoupled channels, channel k being a square well of depth `depths[k]`.
pub fn decoupled_wells(grid: &RadialGrid, depths: &[f64], radius: f64, sectors: Vec<usize>) -> Result<EffectiveOperator> {
    let m = depths.len();
    let mut op = EffectiveOperator::zero(grid.clone(), m, sectors);
    let vals: Vec<Vec<f64>> = depths.iter().map(|&d| well_values(grid, d, radius)).collect();
    for (i, w) in op.local.iter_mut().enumerate() {
        *w = RMat::from_fn(m, m, |a, b| if a == b { vals[a][i] } else { 0.0 });
    }
    op.validate()?;
    Ok(op)
}

/// Depth at which 1 + G₀U on sector ℓ becomes singular for a single-channel
/// square well, by bisection of the determinant sign on [lo, hi].
pub fn critical_depth(grid: &RadialGrid, radius: f64, ell: usize, lo: f64, hi: f64) -> Result<f64> {
    let sign = |depth: f64| -> Result<f64> {
        let op = square_well(grid, depth, radius, vec![ell])?;
        let a = sector_matrix(&op, ell)?;
        Ok(linalg::det_sign(&a.map(|z| z.re)))
    };
    let (mut a, mut b) = (lo, hi);
    let sa = sign(a)?;
    let sb = sign(b)?;
    if sa == 0.0 {
        return Ok(a);
    }
    if sb == 0.0 {
        return Ok(b);
    }
    if sa == sb {
        return Err(Error::invalid("no sign change of det(1 + G₀U) on the bracket"));
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let sm = sign(mid)?;
        if sm == 0.0 {
            return Ok(mid);
        }
        if sm == sa {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// s-wave critical depth near (π/2)²/a².
pub fn s_wave_critical_depth(grid: &RadialGrid, radius: f64) -> Result<f64> {
    let d = (PI / 2.0 / radius).powi(2);
    critical_depth(grid, radius, 0, 0.8 * d, 1.2 * d)
}

/// p-wave critical depth near π²/a².
pub fn p_wave_critical_depth(grid: &RadialGrid, radius: f64) -> Result<f64> {
    let d = (PI / radius).powi(2);
    critical_depth(grid, radius, 1, 0.8 * d, 1.2 * d)
}

/// Exceptional1: s-wave square well at its critical depth.
pub fn critical_s_well(grid: &RadialGrid, radius: f64) -> Result<EffectiveOperator> {
    let d = s_wave_critical_depth(grid, radius)?;
    square_well(grid, d, radius, vec![0])
}

/// Exceptional2: p-wave critical well seen in sectors ℓ = 0, 1 (μ = 3).
pub fn critical_p_well(grid: &RadialGrid, radius: f64) -> Result<EffectiveOperator> {
    let d = p_wave_critical_depth(grid, radius)?;
    square_well(grid, d, radius, vec![0, 1])
}

/// Exceptional3: an s-critical channel and a p-critical channel, decoupled
/// (μ = 4, κ = 1).
pub fn mixed_two_channel(grid: &RadialGrid, radius: f64) -> Result<EffectiveOperator> {
    let ds = s_wave_critical_depth(grid, radius)?;
    let dp = p_wave_critical_depth(grid, radius)?;
    decoupled_wells(grid, &[ds, dp], radius, vec![0, 1])
}

/// Reduced Gaussian profile g(r) = r e^{−αr²}.
pub fn gaussian_profile(grid: &RadialGrid, alpha: f64) -> Vec<f64> {
    grid.nodes.iter().map(|&r| r * (-alpha * r * r).exp()).collect()
}

/// Rank-one s-wave resonance U = −|g⟩⟨g|/⟨g, G₀g⟩ with Gaussian g. The
/// denominator is the grid quadrature, so G₀g spans ker(1 + G₀U) exactly.
pub fn rank_one_resonance(grid: &RadialGrid, alpha: f64) -> Result<EffectiveOperator> {
    let g = gaussian_profile(grid, alpha);
    let gamma = rank_one_gamma(grid, &g);
    let n = grid.len();
    let kernel = CMat::from_fn(n, n, |i, j| c(-g[i] * g[j] / gamma));
    let mut op = EffectiveOperator::zero(grid.clone(), 1, vec![0]);
    op.nonlocal.push(NonlocalBlock { ell: 0, kernel });
    op.validate()?;
    Ok(op)
}

/// ⟨g, G₀g⟩ by grid quadrature.
pub fn rank_one_gamma(grid: &RadialGrid, g: &[f64]) -> f64 {
    let g0 = partial_wave_g0(0, grid).matrix;
    let n = grid.len();
    (0..n).map(|i| g[i] * grid.weights[i] * (0..n).map(|j| g0[(i, j)].re * g[j]).sum::<f64>()).sum()
}

/// Regular fixture: a subcritical s-wave well.
pub fn regular_well(grid: &RadialGrid, radius: f64, fraction: f64) -> Result<EffectiveOperator> {
    square_well(grid, fraction * (PI / 2.0 / radius).powi(2), radius, vec![0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::threshold_classifier::{classify, ThresholdCase};

    #[test]
    fn rank_one_is_exceptional1() {
        let grid = RadialGrid::default_grid();
        let op = rank_one_resonance(&grid, 1.0).unwrap();
        let r = classify(&op).unwrap();
        assert_eq!(r.case, ThresholdCase::Exceptional1);
        assert_eq!((r.mu, r.kappa), (1, 1));
    }

    #[test]
    fn subcritical_well_is_regular() {
        let grid = default_well_grid(1.0).unwrap();
        let op = regular_well(&grid, 1.0, 0.5).unwrap();
        assert_eq!(classify(&op).unwrap().case, ThresholdCase::Regular);
    }
}
