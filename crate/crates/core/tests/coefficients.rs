use canard_core::coefficients::*;
use canard_core::locator::{find_canard_point, CertFlags};
use canard_core::system::{builtin_fhn, builtin_vdp};
use canard_core::CanardError;
use proptest::prelude::*;

fn fhn(i: f64, c: f64) -> (CoefficientSet<f64>, CoefficientSet<f64>) {
    let s = builtin_fhn::<f64>(i, c);
    let cp = find_canard_point(&s, &[i, c], (0.9, i + 0.5, 0.0)).unwrap();
    (
        compute_coefficients(&s, &cp).unwrap(),
        compute_coefficients_with(&s, &cp, DerivativeMode::FiniteDifference).unwrap(),
    )
}

#[test]
fn fhn_table() {
    let (c, _) = fhn(0.0, 1.52);
    let expect = [-1.0, -1.0, 1.0, 1.0, 0.0, -1.52, 0.0, 0.0, 0.0, 1.0 / 3.0, 0.0, 0.0];
    for (k, (got, want)) in c.as_array().iter().zip(expect).enumerate() {
        assert!((got - want).abs() <= 1e-10, "{}: {got} vs {want}", CoefficientSet::<f64>::NAMES[k]);
    }
    assert_eq!(c.source, DerivativeSource::Analytic);
    assert_eq!(c.c2c3(), -1.0);
}

#[test]
fn vdp_table() {
    let s = builtin_vdp::<f64>();
    let cp = find_canard_point(&s, &[], (0.9, -0.5, 0.9)).unwrap();
    let c = compute_coefficients(&s, &cp).unwrap();
    let expect = [-1.0, 1.0, -1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0 / 3.0, 0.0, 0.0];
    for (got, want) in c.as_array().iter().zip(expect) {
        assert!((got - want).abs() <= 1e-10, "{got} vs {want}");
    }
    assert!(c.c2c3() < 0.0);
}

#[test]
fn splitting_sum_of_fhn() {
    let (c, _) = fhn(0.0, 1.52);
    assert!((c.splitting_sum() - (-1.0 / 8.0 - 1.52 / 4.0)).abs() <= 1e-14);
}

#[test]
fn uncertified_point_is_rejected() {
    let s = builtin_fhn::<f64>(0.0, 1.52);
    let mut cp = find_canard_point(&s, &[0.0, 1.52], (0.9, 0.5, 0.0)).unwrap();
    cp.certified = CertFlags { fold_nondegenerate: true, canard_nondegenerate: false, hopf: true };
    assert!(matches!(compute_coefficients(&s, &cp), Err(CanardError::Uncertified(_))));
}

#[test]
fn perturbed_point_changes_little() {
    let s = builtin_fhn::<f64>(0.0, 1.52);
    let cp = find_canard_point(&s, &[0.0, 1.52], (0.9, 0.5, 0.0)).unwrap();
    let base = compute_coefficients(&s, &cp).unwrap();
    let mut moved = cp.clone();
    moved.x0 += 1e-9;
    moved.y0 -= 1e-9;
    moved.a0 += 1e-9;
    let c = compute_coefficients(&s, &moved).unwrap();
    for (p, q) in c.as_array().iter().zip(base.as_array()) {
        assert!((p - q).abs() <= 1e-6 * q.abs().max(1.0), "{p} vs {q}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn finite_differences_agree(i in -0.5..0.5f64, c in 0.5..2.5f64) {
        let (exact, fd) = fhn(i, c);
        prop_assert_eq!(fd.source, DerivativeSource::FiniteDifference);
        for (p, q) in fd.as_array().iter().zip(exact.as_array()) {
            prop_assert!((p - q).abs() <= 1e-5 * q.abs().max(1.0), "{} vs {}", p, q);
        }
    }
}

#[test]
fn single_precision_coefficients() {
    let s = builtin_fhn::<f32>(0.0, 1.52);
    let cp = find_canard_point(&s, &[0.0, 1.52], (0.9, 0.5, 0.0)).unwrap();
    let c = compute_coefficients(&s, &cp).unwrap();
    assert!((c.c6 + 1.52).abs() < 1e-5 && (c.a2 - 1.0 / 3.0).abs() < 1e-5);
}
