use std::f64::consts::{FRAC_PI_2, PI};

use approx::assert_abs_diff_eq;
use canard_core::coefficients::{compute_coefficients, CoefficientSet};
use canard_core::envelope::*;
use canard_core::locator::{find_canard_point, CanardPoint};
use canard_core::melnikov::closed_form_zero;
use canard_core::system::{builtin_fhn, builtin_vdp, Regime};
use proptest::prelude::*;

fn fhn(i: f64, c: f64) -> (CanardPoint<f64>, CoefficientSet<f64>) {
    let s = builtin_fhn::<f64>(i, c);
    let cp = find_canard_point(&s, &[i, c], (0.9, i + 0.5, 0.0)).unwrap();
    let cs = compute_coefficients(&s, &cp).unwrap();
    (cp, cs)
}

#[test]
fn fhn_centre_formula() {
    for &(i, c, eps) in &[(0.0, 1.52, 1e-3), (0.2, 0.9, 1e-2), (-0.3, 2.0, 5e-4)] {
        let (cp, cs) = fhn(i, c);
        let want = -1.0 + (2.0 / 3.0 + i) * c + eps / 8.0 + c * eps / 4.0;
        assert_abs_diff_eq!(a_center(&cs, &cp, eps), want, epsilon = 1e-12);
    }
}

#[test]
fn fhn_low_frequency_values() {
    let (cp, cs) = fhn(0.0, 1.52);
    let e = envelope_low(&cs, &cp, 1e-3, 0.01, 0.0);
    assert_abs_diff_eq!(e.a_center, 0.0138383, epsilon = 1e-7);
    assert_abs_diff_eq!(e.half_width, 0.01, epsilon = 1e-15);
    assert_abs_diff_eq!(e.a_upper, 0.0238383, epsilon = 1e-7);
    assert_eq!(e.regime, Regime::Low);
    assert_abs_diff_eq!(e.formula_uncertainty, 1e-3f64.powf(1.5), epsilon = 1e-18);
}

#[test]
fn fhn_intermediate_and_unified_values() {
    let (cp, cs) = fhn(0.0, 1.52);
    let eps = 1e-3;
    let e = envelope_int(&cs, &cp, eps, 0.01, 1.0);
    assert_abs_diff_eq!(e.half_width, 0.0060653, epsilon = 1e-7);
    assert_abs_diff_eq!(e.a_center, envelope_low(&cs, &cp, eps, 0.01, 3.0).a_center, epsilon = 0.0);
    assert_eq!(envelope_int(&cs, &cp, eps, 0.01, 0.0).half_width, 0.01);
    let u = envelope_unified(&cs, &cp, eps, 0.01, 0.1);
    assert_abs_diff_eq!(u.half_width, 0.01 * (-5.0f64).exp(), epsilon = 1e-18);
    assert_abs_diff_eq!(u.half_width, 6.7379e-5, epsilon = 1e-9);
    let d = envelope(&cs, &cp, eps, 0.01, 0.1, Regime::Unified);
    assert_eq!(d, u);
}

#[test]
fn vdp_values() {
    let s = builtin_vdp::<f64>();
    let cp = find_canard_point(&s, &[], (0.9, -0.5, 0.9)).unwrap();
    let cs = compute_coefficients(&s, &cp).unwrap();
    for &(eps, b, w) in &[(1e-3, 0.01, 5.0), (1e-2, 0.05, 1.0)] {
        let e = envelope_low(&cs, &cp, eps, b, w);
        assert_abs_diff_eq!(e.a_center, 1.0 - eps / 8.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.half_width, b * (-eps * w * w / 2.0).exp(), epsilon = 1e-16);
    }
}

#[test]
fn canard_curve_examples() {
    let (cp, cs) = fhn(0.0, 1.52);
    let (eps, b) = (1e-3, 0.01);
    for w in [0.0, 0.02, 0.1] {
        let e = envelope_unified(&cs, &cp, eps, b, w);
        assert_abs_diff_eq!(canard_curve(&cs, &cp, eps, b, w, FRAC_PI_2), e.a_center, epsilon = 1e-16);
        assert_abs_diff_eq!(canard_curve(&cs, &cp, eps, b, w, PI), e.a_upper, epsilon = 1e-16);
        assert_abs_diff_eq!(canard_curve(&cs, &cp, eps, b, w, 0.0), e.a_lower, epsilon = 1e-16);
    }
    let a = canard_curve(&cs, &cp, eps, b, eps.sqrt(), PI);
    assert_abs_diff_eq!(a, 0.0138383 + 0.0060653, epsilon = 2e-7);
}

#[test]
fn unscaling_round_trips() {
    let (cp, cs) = fhn(0.1, 1.3);
    let u = Unscaling::new(&cs, &cp);
    for v in [-0.7, 0.0, 0.4] {
        assert_abs_diff_eq!(u.x(u.u(v)), v, epsilon = 1e-15);
        assert_abs_diff_eq!(u.y(u.v(v)), v, epsilon = 1e-15);
        assert_abs_diff_eq!(u.a(u.a_tilde(v)), v, epsilon = 1e-15);
        assert_abs_diff_eq!(u.b(u.b_tilde(v)), v, epsilon = 1e-15);
        assert_abs_diff_eq!(u.eps(u.eps_tilde(v.abs())), v.abs(), epsilon = 1e-15);
    }
}

proptest! {
    #[test]
    fn regimes_agree(w in 0.0..0.15f64, eps in 1e-4..1e-2f64, b in 0.0..0.05f64) {
        let (cp, cs) = fhn(0.0, 1.52);
        let u = envelope_unified(&cs, &cp, eps, b, w);
        let kappa = 1.0 + (w * w / (2.0 * cs.c2c3() * eps)).abs();
        let scale = u.a_center.abs() + u.half_width;
        for e in [envelope_low(&cs, &cp, eps, b, w / eps), envelope_int(&cs, &cp, eps, b, w / eps.sqrt())] {
            prop_assert!((e.half_width - u.half_width).abs() <= 8.0 * kappa * f64::EPSILON * u.half_width);
            prop_assert!((e.a_upper - u.a_upper).abs() <= 8.0 * kappa * f64::EPSILON * scale);
            prop_assert!((e.a_lower - u.a_lower).abs() <= 8.0 * kappa * f64::EPSILON * scale);
        }
    }

    #[test]
    fn half_width_is_monotone(w in 0.0..0.2f64, dw in 1e-4..0.05f64, eps in 1e-4..1e-2f64, k in 1.01..3.0f64) {
        let (cp, cs) = fhn(0.0, 1.52);
        let h = |w: f64, e: f64| envelope_unified(&cs, &cp, e, 0.01, w).half_width;
        prop_assert!(h(w + dw, eps) <= h(w, eps));
        prop_assert!(h(w, eps * k) >= h(w, eps));
        prop_assert!(h(w, eps) <= 0.01);
    }

    #[test]
    fn two_phases_inside_none_outside(s in -1.5..1.5f64, w in 0.0..0.1f64) {
        let (cp, cs) = fhn(0.0, 1.52);
        let (eps, b) = (1e-3, 0.01);
        let e = envelope_unified(&cs, &cp, eps, b, w);
        let a = e.a_center + s * e.half_width;
        let phases = canard_phases(&cs, &cp, eps, b, w, a);
        if s.abs() < 1.0 - 1e-9 {
            prop_assert_eq!(phases.len(), 2);
            for t in phases {
                prop_assert!((canard_curve(&cs, &cp, eps, b, w, t) - a).abs() <= 1e-14);
            }
        } else if s.abs() > 1.0 + 1e-9 {
            prop_assert!(phases.is_empty());
        }
    }

    #[test]
    fn melnikov_zero_matches_canard_curve(theta0 in 0.0..6.28f64, wbar in 0.0..10.0f64, big in 0.0..3.0f64,
        eps in 1e-4..1e-2f64, b in 0.001..0.05f64) {
        let (cp, cs) = fhn(0.0, 1.52);
        let low = closed_form_zero(&cs, &cp, eps, b, wbar, theta0, false).unwrap();
        let want = canard_curve(&cs, &cp, eps, b, eps * wbar, theta0);
        prop_assert!((low - want).abs() <= 1e-12 * want.abs().max(1e-2), "{} vs {}", low, want);
        let int = closed_form_zero(&cs, &cp, eps, b, big, theta0, true).unwrap();
        let want = canard_curve(&cs, &cp, eps, b, eps.sqrt() * big, theta0);
        prop_assert!((int - want).abs() <= 1e-12 * want.abs().max(1e-2), "{} vs {}", int, want);
    }
}

#[test]
fn single_precision_envelope() {
    let s = builtin_fhn::<f32>(0.0, 1.52);
    let cp = find_canard_point(&s, &[0.0, 1.52], (0.9, 0.5, 0.0)).unwrap();
    let cs = compute_coefficients(&s, &cp).unwrap();
    let e = envelope_unified(&cs, &cp, 1e-3, 0.01, 0.1);
    assert!((e.half_width - 6.7379e-5).abs() < 1e-8);
}
