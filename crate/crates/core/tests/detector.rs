use std::f64::consts::{FRAC_PI_2, TAU};

use canard_core::coefficients::{compute_coefficients, CoefficientSet};
use canard_core::detector::*;
use canard_core::envelope::envelope_unified;
use canard_core::locator::{find_canard_point, CanardPoint};
use canard_core::system::{builtin_fhn, builtin_vdp, SlowFastSystem};
use canard_core::CanardError;

const EPS: f64 = 1e-3;
const B: f64 = 0.01;

struct Fhn {
    sys: SlowFastSystem<f64>,
    cp: CanardPoint<f64>,
    c: CoefficientSet<f64>,
}

fn fhn() -> Fhn {
    let sys = builtin_fhn::<f64>(0.0, 1.52);
    let cp = find_canard_point(&sys, &[0.0, 1.52], (0.9, 0.5, 0.0)).unwrap();
    let c = compute_coefficients(&sys, &cp).unwrap();
    Fhn { sys, cp, c }
}

fn floor() -> f64 {
    5.0 * EPS * EPS.sqrt()
}

impl Fhn {
    fn profile(&self, b: f64, omega: f64, a: f64, cfg: &DetectorConfig<f64>) -> canard_core::Result<SplittingProfile<f64>> {
        splitting_profile(&self.sys, &self.c, &self.cp, EPS, b, omega, a, cfg)
    }

    fn fold(&self, b: f64, omega: f64, branch: Branch) -> FoldResult<f64> {
        fold_of_canards(&self.sys, &self.c, &self.cp, EPS, b, omega, branch, &DetectorConfig::default(), None).unwrap()
    }

    fn env(&self, b: f64, omega: f64) -> canard_core::envelope::EnvelopeResult<f64> {
        envelope_unified(&self.c, &self.cp, EPS, b, omega)
    }
}

fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

#[test]
fn unforced_splitting_vanishes_at_the_explosion_value() {
    let f = fhn();
    let p = f.profile(0.0, 0.01, f.env(0.0, 0.01).a_center, &DetectorConfig::default()).unwrap();
    let worst = p.delta_min.unwrap().abs().max(p.delta_max.unwrap().abs());
    assert!(worst <= floor(), "{worst:e}");
    assert_eq!(p.coverage, 1.0);
    assert_eq!(p.invalid_attracting + p.invalid_repelling, 0);
}

#[test]
fn crossings_sit_near_the_quarter_phases() {
    let f = fhn();
    let omega = 0.1;
    let p = f.profile(B, omega, f.env(B, omega).a_center, &DetectorConfig::default()).unwrap();
    assert_eq!(p.zero_crossings.len(), 2, "{:?}", p.zero_crossings);
    for target in [FRAC_PI_2, 3.0 * FRAC_PI_2] {
        let d = p.zero_crossings.iter().map(|&t| circular_distance(t, target)).fold(f64::INFINITY, f64::min);
        assert!(d <= 0.1, "{:?}", p.zero_crossings);
    }
}

#[test]
fn no_crossings_outside_the_envelope() {
    let f = fhn();
    let cfg = DetectorConfig::default();
    for omega in [0.01, 0.05] {
        let e = f.env(B, omega);
        let m = 10.0 * EPS * EPS.sqrt();
        for a in [e.a_upper + m, e.a_lower - m] {
            let p = f.profile(B, omega, a, &cfg).unwrap();
            assert!(p.zero_crossings.is_empty(), "omega {omega}, a {a}: {:?}", p.zero_crossings);
        }
        let inside = f.profile(B, omega, e.a_center, &cfg).unwrap();
        assert!(!inside.zero_crossings.is_empty());
    }
}

#[test]
fn crossing_pairs_share_their_cosine() {
    let f = fhn();
    for omega in [0.002, 0.003] {
        let e = f.env(B, omega);
        for s in [-0.9, -0.5, 0.5, 0.9] {
            let p = f.profile(B, omega, e.a_center + s * e.half_width, &DetectorConfig::default()).unwrap();
            assert_eq!(p.zero_crossings.len(), 2, "omega {omega}, s {s}: {:?}", p.zero_crossings);
            let (c1, c2) = (p.zero_crossings[0].cos(), p.zero_crossings[1].cos());
            assert!((c1 - c2).abs() <= 1e-2, "omega {omega}, s {s}: {c1} vs {c2}");
        }
    }
}

#[test]
fn anchor_distance_does_not_move_the_crossings() {
    let f = fhn();
    let omega = 0.02;
    let e = f.env(B, omega);
    let a = e.a_center + 0.5 * e.half_width;
    // At twice the default distance the repelling anchor lies beyond the equilibrium on the middle branch.
    let near = f.profile(B, omega, a, &DetectorConfig { anchor_distance: 0.25, ..DetectorConfig::default() }).unwrap();
    let far = f.profile(B, omega, a, &DetectorConfig::default()).unwrap();
    assert!(!near.zero_crossings.is_empty());
    assert_eq!(near.zero_crossings.len(), far.zero_crossings.len());
    for (p, q) in near.zero_crossings.iter().zip(&far.zero_crossings) {
        assert!(circular_distance(*p, *q) <= 1e-3 * TAU, "{p} vs {q}");
    }
}

#[test]
fn static_fold_of_canards() {
    let f = fhn();
    let up = f.fold(B, 0.0, Branch::Upper);
    assert!((up.a - 0.0238383).abs() <= floor(), "{}", up.a);
    assert!(up.iterations <= 40 && up.bracket.0 <= up.a && up.a <= up.bracket.1);
}

#[test]
fn intermediate_fold_of_canards() {
    let f = fhn();
    let up = f.fold(B, EPS.sqrt(), Branch::Upper);
    assert!((up.a - (0.0138383 + 0.0060653)).abs() <= floor(), "{}", up.a);
}

#[test]
fn fold_width_matches_the_envelope() {
    let f = fhn();
    let omega = 0.03;
    let (up, lo) = (f.fold(B, omega, Branch::Upper), f.fold(B, omega, Branch::Lower));
    let tol_a = 1e-3 * EPS * EPS.sqrt();
    assert!(lo.a < up.a);
    assert!(((up.a - lo.a) - 2.0 * f.env(B, omega).half_width).abs() <= floor() + tol_a);
}

#[test]
fn unforced_folds_coincide() {
    let f = fhn();
    let (up, lo) = (f.fold(0.0, 0.01, Branch::Upper), f.fold(0.0, 0.01, Branch::Lower));
    let centre = f.env(0.0, 0.01).a_center;
    assert!((up.a - centre).abs() <= floor() && (lo.a - centre).abs() <= floor(), "{} {} {}", up.a, lo.a, centre);
}

#[test]
fn too_many_escapes_is_an_error() {
    let f = fhn();
    let omega = 0.001;
    let a = f.env(B, omega).a_center + 0.0103;
    match f.profile(B, omega, a, &DetectorConfig::default()) {
        Err(CanardError::TooManyInvalid { invalid, total }) => assert!(2 * invalid > total),
        Ok(p) => assert!(2 * p.invalid_attracting.max(p.invalid_repelling) <= p.samples.len().max(128)),
        Err(e) => panic!("{e}"),
    }
}

#[test]
fn inputs_are_validated() {
    let f = fhn();
    let cfg = DetectorConfig::default();
    assert!(splitting_profile(&f.sys, &f.c, &f.cp, 0.0, B, 0.01, 0.01, &cfg).unwrap_err().is_validation());
    assert!(splitting_profile(&f.sys, &f.c, &f.cp, EPS, B, -0.01, 0.01, &cfg).unwrap_err().is_validation());
    let bad = DetectorConfig { phases: 2, ..DetectorConfig::default() };
    assert!(splitting_profile(&f.sys, &f.c, &f.cp, EPS, B, 0.01, 0.01, &bad).unwrap_err().is_validation());
}

#[test]
fn boundary_tracks_the_fhn_envelope() {
    let f = fhn();
    let omegas = [0.005, 0.04, 0.09];
    let curve = trace_boundary(&f.sys, &f.c, &f.cp, EPS, B, &omegas, &DetectorConfig::default()).unwrap();
    assert_eq!(curve.gaps(), 0);
    for p in &curve.points {
        assert_eq!(p.gap_flags(), "ok");
        let (lo, up) = (p.a_lower_num.unwrap(), p.a_upper_num.unwrap());
        assert!(lo < up);
        assert!((lo - p.a_lower_theory).abs() <= floor() + 2e-4);
        assert!((up - p.a_upper_theory).abs() <= floor() + 2e-4);
    }
    let json = serde_json::to_string(&curve).unwrap();
    assert_eq!(serde_json::from_str::<BoundaryCurve<f64>>(&json).unwrap(), curve);
}

#[test]
fn boundary_tracks_the_vdp_envelope() {
    let sys = builtin_vdp::<f64>();
    let cp = find_canard_point(&sys, &[], (0.9, -0.5, 0.9)).unwrap();
    let c = compute_coefficients(&sys, &cp).unwrap();
    let curve = trace_boundary(&sys, &c, &cp, EPS, B, &[0.01, 0.05], &DetectorConfig::default()).unwrap();
    for p in &curve.points {
        let w = B * (-p.omega * p.omega / (2.0 * EPS)).exp();
        let centre = 1.0 - EPS / 8.0;
        assert!((p.a_upper_num.unwrap() - (centre + w)).abs() <= floor() + 2e-4);
        assert!((p.a_lower_num.unwrap() - (centre - w)).abs() <= floor() + 2e-4);
    }
}

#[test]
fn gap_flags() {
    let p = BoundaryPoint::<f64> {
        omega: 0.0,
        a_lower_num: None,
        a_upper_num: Some(1.0),
        a_lower_theory: 0.0,
        a_upper_theory: 1.0,
        lower_failure: Some("x".into()),
        upper_failure: None,
    };
    assert_eq!(p.gap_flags(), "lower");
    assert_eq!(BoundaryPoint { a_upper_num: None, ..p.clone() }.gap_flags(), "both");
    assert_eq!(BoundaryPoint { a_lower_num: Some(0.0), a_upper_num: None, ..p }.gap_flags(), "upper");
}
