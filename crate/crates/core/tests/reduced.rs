use std::f64::consts::{FRAC_PI_2, PI};

use approx::assert_abs_diff_eq;
use canard_core::coefficients::compute_coefficients;
use canard_core::locator::{find_canard_point, CanardPoint};
use canard_core::reduced::*;
use canard_core::system::{builtin_fhn, builtin_vdp, FastPartial, SlowFastSystem};
use proptest::prelude::*;

fn fhn() -> (SlowFastSystem<f64>, CanardPoint<f64>) {
    let s = builtin_fhn::<f64>(0.0, 1.52);
    let cp = find_canard_point(&s, &[0.0, 1.52], (0.9, 0.5, 0.0)).unwrap();
    (s, cp)
}

#[test]
fn slow_graph_lies_on_the_critical_manifold() {
    let (s, cp) = fhn();
    for x in [0.6, 1.0, 1.4, 1.9] {
        let y = slow_graph(&s, &cp.p, x, cp.y0).unwrap();
        assert_abs_diff_eq!(s.fast(x, y, &cp.p, 0.0), 0.0, epsilon = 1e-12);
    }
}

#[test]
fn desingularized_field_examples() {
    let (s, cp) = fhn();
    let b = 0.01;
    let (dx, dth) = desingularized_rhs(&s, &cp, (cp.x0, FRAC_PI_2), cp.a0, b, 1.0).unwrap();
    assert_abs_diff_eq!(dx, 0.0, epsilon = 1e-12);
    assert_abs_diff_eq!(dth, 0.0, epsilon = 1e-12);

    let (dx, dth) = desingularized_rhs(&s, &cp, (cp.x0, 0.3), cp.a0, b, 1.0).unwrap();
    assert!(dx.abs() > 1e-4);
    assert_abs_diff_eq!(dth, 0.0, epsilon = 1e-12);

    for x in [1.2, 1.5] {
        let (_, dth) = desingularized_rhs(&s, &cp, (x, 1.0), cp.a0, b, 0.7).unwrap();
        assert!(dth > 0.0);
    }
}

#[test]
fn orientation_is_reversed_on_the_repelling_sheet() {
    let (s, cp) = fhn();
    let raw = desingularized_rhs(&s, &cp, (0.6, 1.0), cp.a0, 0.01, 0.7).unwrap();
    let cor = orientation_corrected(&s, &cp, (0.6, 1.0), cp.a0, 0.01, 0.7).unwrap();
    assert_eq!(cor, (-raw.0, -raw.1));
    let raw = desingularized_rhs(&s, &cp, (1.4, 1.0), cp.a0, 0.01, 0.7).unwrap();
    let cor = orientation_corrected(&s, &cp, (1.4, 1.0), cp.a0, 0.01, 0.7).unwrap();
    assert_eq!(cor, raw);
}

fn check_on_set(s: &SlowFastSystem<f64>, cp: &CanardPoint<f64>, a: f64, b: f64, f: &FoldedSingularity<f64>) {
    assert!(s.fast_d(FastPartial::X, f.x, f.y, &cp.p, 0.0).abs() <= 1e-10);
    assert!((s.slow(f.x, f.y, a, &cp.p, 0.0) + b * f.theta.cos()).abs() <= 1e-10);
}

#[test]
fn singularities_at_the_canard_value() {
    let (s, cp) = fhn();
    let r = find_folded_singularities(&s, &cp, cp.a0, 0.01, 1.0).unwrap();
    assert!(!r.degenerate_ring);
    let mut th: Vec<f64> = r.points.iter().map(|p| p.theta).collect();
    th.sort_by(f64::total_cmp);
    assert_eq!(th.len(), 2);
    assert_abs_diff_eq!(th[0], FRAC_PI_2, epsilon = 1e-10);
    assert_abs_diff_eq!(th[1], 3.0 * FRAC_PI_2, epsilon = 1e-10);
    for p in &r.points {
        check_on_set(&s, &cp, cp.a0, 0.01, p);
    }
}

#[test]
fn unforced_ring_and_no_roots() {
    let (s, cp) = fhn();
    let r = find_folded_singularities(&s, &cp, cp.a0, 0.0, 1.0).unwrap();
    assert!(r.degenerate_ring && r.points.is_empty());
    let far = find_folded_singularities(&s, &cp, cp.a0 + 0.05, 0.01, 1.0).unwrap();
    assert!(far.points.is_empty() && !far.degenerate_ring);
}

#[test]
fn saddle_node_merger() {
    let (s, cp) = fhn();
    let c = compute_coefficients(&s, &cp).unwrap();
    let b = 0.01;
    let a = fsn_parameter(&c, &cp, b).unwrap();
    assert_abs_diff_eq!(a, cp.a0 - 0.01, epsilon = 1e-15);
    let r = find_folded_singularities(&s, &cp, a, b, 1.0).unwrap();
    assert_eq!(r.points.len(), 1);
    assert_abs_diff_eq!(r.points[0].theta.min(2.0 * PI - r.points[0].theta), 0.0, epsilon = 1e-6);
    assert_eq!(r.points[0].class, SingularityClass::Degenerate);
    check_on_set(&s, &cp, a, b, &r.points[0]);
    assert_eq!(fsn_parameter(&c, &cp, 0.0).unwrap(), cp.a0);
}

#[test]
fn vdp_saddle_node_parameter() {
    let s = builtin_vdp::<f64>();
    let cp = find_canard_point(&s, &[], (0.9, -0.5, 0.9)).unwrap();
    let c = compute_coefficients(&s, &cp).unwrap();
    assert_abs_diff_eq!(fsn_parameter(&c, &cp, 0.02).unwrap(), 0.98, epsilon = 1e-12);
}

proptest! {
    #[test]
    fn classification_agrees(tr in -3.0..3.0f64, det in -3.0..3.0f64) {
        let eig = eigenvalues_2x2(tr, det);
        prop_assert_eq!(classify(&eig), classify_trace_det(tr, det));
        let sum = eig[0] + eig[1];
        let prod = eig[0] * eig[1];
        prop_assert!((sum.re - tr).abs() <= 1e-12 && sum.im.abs() <= 1e-12);
        prop_assert!((prod.re - det).abs() <= 1e-12 && prod.im.abs() <= 1e-12);
    }

    #[test]
    fn every_singularity_is_on_the_set(da in -0.009..0.009f64, b in 0.01..0.05f64, w in 0.1..3.0f64) {
        let (s, cp) = fhn();
        let a = cp.a0 + da;
        let r = find_folded_singularities(&s, &cp, a, b, w).unwrap();
        prop_assert_eq!(r.points.len(), 2);
        for p in &r.points {
            check_on_set(&s, &cp, a, b, p);
            let j = desingularized_jacobian(&s, p.x, p.y, p.theta, a, b, w, &cp.p);
            let tr = j[0][0] + j[1][1];
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            prop_assert_eq!(p.class, classify_trace_det(tr, det));
        }
    }
}
