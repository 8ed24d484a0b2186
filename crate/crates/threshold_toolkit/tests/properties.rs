use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use threshold_toolkit::critical_channel::{angular_spectrum, AngularOperator};
use threshold_toolkit::fixtures;
use threshold_toolkit::free_resolvent::{green_kernel, RadialGrid};
use threshold_toolkit::grushin_core::{
    adjoint_defect, build_blocks, multiple_cluster_setup, random_hermitian, random_matrix, resolvent_via_grushin,
    ReductionSetup,
};
use threshold_toolkit::scattering_threshold::{levinson_from_c, scattering_length};
use threshold_toolkit::threshold_classifier::{c_vector, classify, EffectiveOperator, ThresholdCase, ThresholdState};

type CMat = DMatrix<C64>;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

fn unit_vector(parts: &[(f64, f64)]) -> Vec<C64> {
    let v: Vec<C64> = parts.iter().map(|&(a, b)| C64::new(a, b)).collect();
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / n).collect()
}

#[test]
fn green_kernel_reference_values() {
    let o = [0.0; 3];
    let g1 = green_kernel(1, o, [0.3, -2.0, 5.0]).unwrap();
    assert!((g1 - C64::new(0.0, 1.0 / (4.0 * PI))).norm() < 1e-16);
    let g0 = green_kernel(0, o, [0.0, 2.0, 0.0]).unwrap();
    assert!((g0 - C64::new(1.0 / (8.0 * PI), 0.0)).norm() < 1e-16);
    // Taylor coefficient of e^{ik d}/(4πd) at k²: −d/(8π).
    let g2 = green_kernel(2, o, [1.0, 0.0, 0.0]).unwrap();
    assert!((g2 - C64::new(-1.0 / (8.0 * PI), 0.0)).norm() < 1e-16);
    assert!(green_kernel(0, o, o).is_err());
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn green_kernels_match_taylor_coefficients(
        x in prop::array::uniform3(-5.0f64..5.0),
        y in prop::array::uniform3(-5.0f64..5.0),
        k in 1e-3f64..0.3,
    ) {
        let d = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2) + (x[2] - y[2]).powi(2)).sqrt();
        prop_assume!(d > 1e-3);
        let exact = (C64::new(0.0, k * d)).exp() / (4.0 * PI * d);
        let mut partial = C64::new(0.0, 0.0);
        for j in 0..4 {
            partial += green_kernel(j, x, y).unwrap() * k.powi(j as i32);
        }
        let bound = (k * d).powi(4) / (24.0 * 4.0 * PI * d);
        prop_assert!((exact - partial).norm() <= 1.01 * bound + 1e-15);
    }
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn grushin_inverse_matches_direct_inverse(
        seed in any::<u64>(),
        n in 4usize..24,
        k in 1usize..4,
        re in -3.0f64..3.0,
        im in 0.05f64..2.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_hermitian(&mut rng, n);
        let s = random_matrix(&mut rng, n, k);
        let setup = ReductionSetup::new(h.clone(), s).unwrap();
        let z = C64::new(re, im);
        let via = resolvent_via_grushin(&build_blocks(&setup, z).unwrap()).unwrap();
        let direct = (h - CMat::identity(n, n) * z).try_inverse().unwrap();
        prop_assert!((&via - &direct).norm() <= 1e-10 * direct.norm());
        prop_assert!(adjoint_defect(&setup, z).unwrap() <= 1e-10);
    }

    #[test]
    fn orthogonal_cluster_ranges_have_identity_gram(seed in any::<u64>(), n in 6usize..16) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_hermitian(&mut rng, n);
        let q = random_matrix(&mut rng, n, n).qr().q();
        let s1 = q.columns(0, 2).into_owned();
        let s2 = q.columns(2, 2).into_owned();
        let m = multiple_cluster_setup(h, &s1, &s2).unwrap();
        prop_assert_eq!(m.overlap_dim, 0);
        let gram = m.setup.s.adjoint() * &m.setup.s;
        prop_assert!((gram - CMat::identity(4, 4)).norm() < 1e-12);
    }
}

proptest! {
    #![proptest_config(config(32))]

    #[test]
    fn constant_angular_shift_moves_the_index(q in -0.2f64..2.0) {
        let op = AngularOperator::constant(3, &CMat::from_element(1, 1, C64::new(q, 0.0)));
        let spec = angular_spectrum(&op).unwrap();
        let nu0 = (q + 0.25).sqrt();
        prop_assert!((spec.nu0 - nu0).abs() < 1e-12);
        prop_assert!((spec.s_a - (1.0 + nu0)).abs() < 1e-12);
        prop_assert!(spec.hardy_ok);
        // ν_l = √((l + 1/2)² + q) for l ≥ 0, each with multiplicity 2l + 1
        let expected: usize = (0..4)
            .filter(|&l| {
                let nu = ((l as f64 + 0.5).powi(2) + q).sqrt();
                nu > 0.0 && nu <= 1.0
            })
            .map(|l| 2 * l + 1)
            .sum();
        prop_assume!((0..4).all(|l| (((l as f64 + 0.5).powi(2) + q).sqrt() - 1.0).abs() > 1e-9));
        prop_assert_eq!(spec.d_a, expected);
    }
}

#[test]
fn shifted_angular_spectrum_example() {
    let op = AngularOperator::constant(3, &CMat::from_element(1, 1, C64::new(0.3, 0.0)));
    let spec = angular_spectrum(&op).unwrap();
    assert!((spec.nu0 - 0.55f64.sqrt()).abs() < 1e-14);
    assert!((spec.s_a - (1.0 + 0.55f64.sqrt())).abs() < 1e-14);
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn threshold_s_matrix_is_a_unitary_involution(
        parts in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 3),
        probe in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 3),
    ) {
        prop_assume!(parts.iter().map(|(a, b)| a * a + b * b).sum::<f64>() > 1e-3);
        prop_assume!(probe.iter().map(|(a, b)| a * a + b * b).sum::<f64>() > 1e-3);
        let cv = unit_vector(&parts);
        let s = levinson_from_c(std::slice::from_ref(&cv), 3).unwrap();
        prop_assert!(!s.maximal);
        let a = &s.constant_block;
        prop_assert!((a * a - CMat::identity(3, 3)).norm() < 1e-12);
        prop_assert!(s.unitarity_defect() < 1e-12);
        // a*(1 − 2cc*)a = 1 − 2|⟨c, a⟩|²
        let p = unit_vector(&probe);
        let w: f64 = cv.iter().zip(&p).map(|(ci, pi)| ci.conj() * pi).sum::<C64>().norm_sqr();
        prop_assert!((s.elastic_defect(&p) - 4.0 * w * (1.0 - w)).abs() < 1e-12);
    }
}

#[test]
fn maximal_resonance_flips_every_channel() {
    let s = levinson_from_c(&[vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)], vec![C64::new(0.0, 0.0), C64::new(0.0, 1.0)]], 2)
        .unwrap();
    assert!(s.maximal);
    assert!((&s.constant_block + CMat::identity(2, 2)).norm() < 1e-15);
}

#[test]
fn zero_operator_is_regular_with_zero_scattering_length() {
    let grid = RadialGrid::uniform(20.0, 200).unwrap();
    let op = EffectiveOperator::zero(grid, 2, vec![0, 1]);
    let r = classify(&op).unwrap();
    assert_eq!(r.case, ThresholdCase::Regular);
    assert_eq!(r.mu, 0);
    let s = scattering_length(&op, 1).unwrap();
    assert!(s.components.iter().all(|z| z.norm() == 0.0));
}

#[test]
fn c_vector_is_linear_in_the_state() {
    let grid = RadialGrid::uniform(30.0, 300).unwrap();
    let op = fixtures::rank_one_resonance(&grid, 1.0).unwrap();
    let r = classify(&op).unwrap();
    assert_eq!(r.case, ThresholdCase::Exceptional1);
    let base = &r.states[0];
    let c1 = c_vector(&op, base);
    assert!(c1[0].norm() > 1e-3);
    let mut runner = proptest::test_runner::TestRunner::new(config(32));
    runner
        .run(&(-5.0f64..5.0, -5.0f64..5.0), |(a, b)| {
            let t = C64::new(a, b);
            let scaled = ThresholdState { values: base.values.iter().map(|v| v * t).collect(), ..base.clone() };
            let ct = c_vector(&op, &scaled);
            prop_assert!((ct[0] - c1[0] * t).norm() <= 1e-12 * (1.0 + (c1[0] * t).norm()));
            Ok(())
        })
        .unwrap();
}

proptest! {
    #![proptest_config(config(12))]

    #[test]
    fn weak_well_scattering_length_approaches_born(depth in 1e-4f64..1e-2, radius in 0.5f64..2.0) {
        let grid = fixtures::well_grid(radius, 8.0, 200, 60).unwrap();
        let op = fixtures::square_well(&grid, depth, radius, vec![0]).unwrap();
        let s = scattering_length(&op, 0).unwrap().value(0).re;
        // exact: a(1 − tan(k₀a)/(k₀a)); Born: −depth·a³/3
        let x = depth.sqrt() * radius;
        let exact = radius * (1.0 - x.tan() / x);
        let born = -depth * radius.powi(3) / 3.0;
        prop_assert!((s - exact).abs() <= 1e-3 * exact.abs());
        prop_assert!((s / born - 1.0).abs() <= depth * radius * radius);
    }
}
