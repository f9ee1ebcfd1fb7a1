use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use canard_core::coefficients::{CoefficientSet, DerivativeSource};
use canard_core::melnikov::*;
use canard_core::quadrature::{integrate_truncated, GaussLegendre, QuadratureSpec};
use canard_core::verify::{energy_level_start, hamiltonian_drift, random_coefficients};
use canard_core::CanardError;
use proptest::prelude::*;
use rand::SeedableRng;

fn zero_set() -> CoefficientSet<f64> {
    CoefficientSet {
        c1: -1.0,
        c2: -1.0,
        c3: 1.0,
        c4: 1.0,
        c5: 0.0,
        c6: 0.0,
        c7: 0.0,
        c8: 0.0,
        a1: 0.0,
        a2: 0.0,
        a3: 0.0,
        a4: 0.0,
        source: DerivativeSource::Analytic,
    }
}

fn fhn_set(c: f64) -> CoefficientSet<f64> {
    CoefficientSet { c6: -c, a2: 1.0 / 3.0, ..zero_set() }
}

#[test]
fn hamiltonian_values() {
    assert_eq!(hamiltonian(HamiltonianState::new(0.0, 0.0), 0.0), -0.5);
    assert_eq!(hamiltonian(HamiltonianState::new(1.0, 0.0), 0.0), 0.5);
    for t in [-3.0, -0.5, 0.0, 1.0, 4.0] {
        assert_abs_diff_eq!(hamiltonian(gamma(t, 0.3), 0.3), 0.0, epsilon = 1e-14);
    }
}

#[test]
fn heteroclinic_parametrization() {
    let g = gamma(0.0, 0.0);
    assert_eq!((g.u2, g.v2), (0.0, -0.5));
    for k in 0..1000 {
        let t = -12.0 + 24.0 * k as f64 / 999.0;
        let (du, dv) = gamma_velocity(t);
        let (fu, fv) = unperturbed_rhs(gamma(t, -0.2), -0.2);
        assert!((du - fu).abs() <= 1e-14 && (dv - fv).abs() <= 1e-14);
    }
}

#[test]
fn gradient_matches_differences() {
    let s = HamiltonianState::new(0.4, -0.3);
    let (hu, hv) = hamiltonian_gradient(s, 0.1);
    let h = 1e-6;
    let du = (hamiltonian(HamiltonianState::new(0.4 + h, -0.3), 0.1) - hamiltonian(HamiltonianState::new(0.4 - h, -0.3), 0.1)) / (2.0 * h);
    let dv = (hamiltonian(HamiltonianState::new(0.4, -0.3 + h), 0.1) - hamiltonian(HamiltonianState::new(0.4, -0.3 - h), 0.1)) / (2.0 * h);
    assert_abs_diff_eq!(hu, du, epsilon = 1e-8);
    assert_abs_diff_eq!(hv, dv, epsilon = 1e-8);
}

#[test]
fn energy_is_conserved() {
    for &(h, c5) in &[(-1.0, 0.5), (-0.1, 0.0), (0.1, 0.0)] {
        let s = energy_level_start(h, c5).unwrap();
        assert_abs_diff_eq!(hamiltonian(s, c5), h, epsilon = 1e-12);
        assert!(hamiltonian_drift(s, c5, 20.0, 1e-10).unwrap() <= 1e-8);
    }
    // The energy is bounded below by −e^{2c₅}/2.
    assert!(energy_level_start(-1.0, 0.0).is_none());
}

#[test]
fn gauss_legendre_is_exact_for_polynomials() {
    let g = GaussLegendre::<f64>::new(10);
    assert_abs_diff_eq!(g.apply(&|x: f64| x.powi(19) + x.powi(6), -1.0, 1.0), 2.0 / 7.0, epsilon = 1e-15);
    let gauss = integrate_truncated(|t: f64| (-t * t / 2.0).exp(), 0.0, &QuadratureSpec::default()).unwrap();
    assert_abs_diff_eq!(gauss, (2.0 * PI).sqrt(), epsilon = 1e-10);
}

#[test]
fn slow_tail_is_an_error() {
    let r = integrate_truncated(|t: f64| 1.0 / (1.0 + t * t), 0.0, &QuadratureSpec::default());
    assert!(matches!(r, Err(CanardError::Quadrature(_))));
}

fn low(alpha: f64, beta: f64, gamma: f64, theta0: f64, r2: f64, omega_bar: f64) -> BlowupScaledParams<f64> {
    BlowupScaledParams::Low { alpha, beta, gamma, theta0, r2, omega_bar }
}

fn int(alpha_t: f64, beta_t: f64, theta0: f64, r2: f64, big_omega: f64) -> BlowupScaledParams<f64> {
    BlowupScaledParams::Intermediate { alpha_t, beta_t, theta0, r2, big_omega }
}

#[test]
fn zero_perturbation() {
    let q = QuadratureSpec::default();
    let m = melnikov_low(&zero_set(), &low(0.0, 0.0, 0.0, 0.3, 0.5, 1.0), &q).unwrap();
    assert_eq!((m.d_r2sq_numeric, m.d_r2sq_closed, m.d_r2cube_numeric), (0.0, 0.0, 0.0));
}

#[test]
fn constant_vertical_perturbation() {
    let m = melnikov_low(&zero_set(), &low(0.0, 0.0, 1.0, 0.0, 0.5, 0.0), &QuadratureSpec::default()).unwrap();
    let k = std::f64::consts::E * (2.0 * PI).sqrt();
    assert_abs_diff_eq!(m.d_r2sq_numeric, -k, epsilon = 1e-9);
    assert_abs_diff_eq!(m.d_r2sq_numeric, -6.813722, epsilon = 1e-6);
    assert_abs_diff_eq!(m.d_r2sq_closed, -k, epsilon = 1e-14);
}

#[test]
fn fhn_intermediate_closed_form() {
    let m = melnikov_int(&fhn_set(1.52), &int(0.0, 0.0, 0.0, 0.1, 1.0), &QuadratureSpec::default()).unwrap();
    assert_abs_diff_eq!(m.d_r2_closed, std::f64::consts::E * (2.0 * PI).sqrt() * -0.505, epsilon = 1e-12);
    assert_abs_diff_eq!(m.d_r2_closed, -3.440930, epsilon = 1e-6);
    assert!((m.d_r2_numeric - m.d_r2_closed).abs() <= 1e-6 * m.d_r2_closed.abs());
}

#[test]
fn fast_forcing_averages_out() {
    let q = QuadratureSpec::default();
    let forced = melnikov_int(&fhn_set(1.52), &int(0.0, 1.0, 0.4, 0.1, 12.0), &q).unwrap();
    let free = melnikov_int(&fhn_set(1.52), &int(0.0, 0.0, 0.4, 0.1, 12.0), &q).unwrap();
    assert!((forced.d_r2_numeric - free.d_r2_numeric).abs() <= 1e-10);
}

#[test]
fn regime_mismatch_and_validation() {
    let q = QuadratureSpec::default();
    assert!(matches!(melnikov_low(&zero_set(), &int(0.0, 0.0, 0.0, 0.1, 1.0), &q), Err(CanardError::WrongRegime { .. })));
    assert!(matches!(melnikov_int(&zero_set(), &low(0.0, 0.0, 0.0, 0.0, 0.1, 1.0), &q), Err(CanardError::WrongRegime { .. })));
    assert!(melnikov_low(&zero_set(), &low(f64::NAN, 0.0, 0.0, 0.0, 0.1, 1.0), &q).is_err());
    let flat = CoefficientSet { c3: -1.0, ..zero_set() };
    assert!(melnikov_int(&flat, &int(0.0, 0.0, 0.0, 0.1, 1.0), &q).is_err());
}

#[test]
fn serde_round_trip() {
    let p = low(0.1, 0.2, 0.3, 0.4, 0.5, 0.6);
    let s = serde_json::to_string(&p).unwrap();
    assert_eq!(serde_json::from_str::<BlowupScaledParams<f64>>(&s).unwrap(), p);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn numeric_matches_closed(seed in any::<u64>(), alpha in -2.0..2.0f64, beta in -2.0..2.0f64,
        g in -2.0..2.0f64, theta0 in 0.0..6.28f64, r2 in 0.1..1.0f64, w in 0.0..3.0f64) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let c = random_coefficients(&mut rng);
        let q = QuadratureSpec::default();
        let m = melnikov_low(&c, &low(alpha, beta, g, theta0, r2, w), &q).unwrap();
        prop_assert!((m.d_r2sq_numeric - m.d_r2sq_closed).abs() <= 1e-6 * m.d_r2sq_closed.abs().max(1e-300));
        prop_assert!(m.d_r2cube_numeric.abs() <= 1e-9);
        let n = melnikov_int(&c, &int(alpha, beta, theta0, r2, w), &q).unwrap();
        prop_assert!((n.d_r2_numeric - n.d_r2_closed).abs() <= 1e-6 * n.d_r2_closed.abs().max(1e-300));
    }
}
