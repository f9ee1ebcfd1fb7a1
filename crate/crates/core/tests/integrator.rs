use approx::assert_abs_diff_eq;
use canard_core::integrator::*;
use canard_core::melnikov::{hamiltonian, HamiltonianState};
use canard_core::system::builtin_fhn;
use canard_core::verify::hamiltonian_drift;
use canard_core::CanardError;
use proptest::prelude::*;

fn decay(_t: f64, y: &[f64], d: &mut [f64]) {
    d[0] = -y[0];
}

fn oscillator(_t: f64, y: &[f64], d: &mut [f64]) {
    d[0] = y[1];
    d[1] = -y[0];
}

#[test]
fn exponential_decay() {
    let tr = integrate(&IvpSpec::new(&decay, 0.0, 1.0, vec![1.0])).unwrap();
    assert_eq!(tr.termination, Termination::Completed);
    assert_eq!(tr.last_t(), 1.0);
    assert_abs_diff_eq!(tr.last_state()[0], (-1.0f64).exp(), epsilon = 1e-10);
    assert!(tr.accepted > 0 && tr.rhs_evals >= 12 * tr.accepted);
}

#[test]
fn halving_the_step_cuts_the_error_by_the_method_order() {
    let err = |h: f64| {
        let spec = IvpSpec::new(&decay, 0.0, 10.0, vec![1.0]).tolerances(1.0, 1.0).max_step(h);
        (integrate(&spec).unwrap().last_state()[0] - (-10.0f64).exp()).abs()
    };
    for h in [2.0, 1.0] {
        let (e1, e2) = (err(h), err(h / 2.0));
        assert!(e1 >= 8.0 * e2, "h={h}: {e1:e} vs {e2:e}");
    }
}

#[test]
fn tighter_tolerance_is_more_accurate() {
    let err = |tol: f64| {
        let spec = IvpSpec::new(&oscillator, 0.0, 20.0, vec![1.0, 0.0]).tolerances(tol, tol).max_step(20.0);
        (integrate(&spec).unwrap().last_state()[0] - 20.0f64.cos()).abs()
    };
    assert!(err(1e-10) < err(1e-6));
    assert!(err(1e-6) <= 1e-4);
}

#[test]
fn dense_output_tracks_the_solution() {
    let tr = integrate(&IvpSpec::new(&oscillator, 0.0, 10.0, vec![1.0, 0.0])).unwrap();
    for k in 0..=400 {
        let t = 10.0 * k as f64 / 400.0;
        let s = tr.sample(t).unwrap();
        assert_abs_diff_eq!(s[0], t.cos(), epsilon = 1e-8);
        assert_abs_diff_eq!(s[1], -t.sin(), epsilon = 1e-8);
    }
    assert!(tr.sample(-0.5).is_none() && tr.sample(10.5).is_none());
}

#[test]
fn backward_integration_returns_home() {
    let tol = 1e-10;
    let s = builtin_fhn::<f64>(0.0, 1.52);
    let p = [0.0, 1.52];
    let rhs = s.forced_rhs(&p, 0.02, 0.01, 0.5, 0.1);
    let y0 = vec![1.6, 0.5, 0.0];
    let fwd = integrate(&IvpSpec::new(&rhs, 0.0, 5.0, y0.clone()).tolerances(tol, tol)).unwrap();
    let back = integrate(&IvpSpec::new(&rhs, 5.0, 0.0, fwd.last_state().to_vec()).tolerances(tol, tol)).unwrap();
    for (a, b) in back.last_state().iter().zip(&y0) {
        assert!((a - b).abs() <= 10.0 * tol * b.abs().max(1.0), "{a} vs {b}");
    }
    let mid = back.sample(2.5).unwrap();
    assert_abs_diff_eq!(mid[0], fwd.sample(2.5).unwrap()[0], epsilon = 1e-8);
}

#[test]
fn section_event_on_fhn() {
    let s = builtin_fhn::<f64>(0.0, 1.52);
    let p = [0.0, 1.52];
    let rhs = s.forced_rhs(&p, 0.0133, 0.01, 0.01, 0.01);
    let sec = |_t: f64, y: &[f64]| y[0] - 1.0;
    let spec = IvpSpec::new(&rhs, 0.0, 400.0, vec![1.5, 0.0, 0.0]).event(Event::new(&sec, Direction::Falling, true));
    let tr = integrate(&spec).unwrap();
    assert_eq!(tr.termination, Termination::Event(0));
    let hit = &tr.events[0];
    assert!((hit.state[0] - 1.0).abs() <= 1e-10);
    assert_eq!(tr.last_t(), hit.t);
}

#[test]
fn event_directions() {
    let zero = |_t: f64, y: &[f64]| y[0];
    let up = |_t: f64, y: &[f64]| y[0];
    let spec = IvpSpec::new(&oscillator, 0.0, 20.0, vec![1.0, 0.0])
        .event(Event::new(&zero, Direction::Either, false))
        .event(Event::new(&up, Direction::Rising, false));
    let tr = integrate(&spec).unwrap();
    let all: Vec<f64> = tr.events.iter().filter(|e| e.index == 0).map(|e| e.t).collect();
    let rising: Vec<f64> = tr.events.iter().filter(|e| e.index == 1).map(|e| e.t).collect();
    let pi = std::f64::consts::PI;
    assert_eq!(all.len(), 6);
    for (k, t) in all.iter().enumerate() {
        assert_abs_diff_eq!(*t, pi / 2.0 + k as f64 * pi, epsilon = 1e-10);
    }
    assert_eq!(rising.len(), 3);
    assert_abs_diff_eq!(rising[0], 1.5 * pi, epsilon = 1e-10);
    for e in &tr.events {
        assert!(e.state[0].abs() <= 1e-10);
    }
}

#[test]
fn energy_of_the_blowup_system() {
    // From (0, −0.6) the orbit lies outside the heteroclinic loop and escapes in finite time.
    let s = HamiltonianState::new(0.0, -0.6);
    assert!(hamiltonian(s, 0.0) > 0.0);
    assert!(hamiltonian_drift(s, 0.0, 20.0, 1e-10).unwrap() <= 1e-8);
}

#[test]
fn failures_are_reported() {
    let bad = |_t: f64, _y: &[f64], d: &mut [f64]| d[0] = f64::NAN;
    assert!(matches!(integrate(&IvpSpec::new(&bad, 0.0, 1.0, vec![1.0])), Err(CanardError::NonFinite { .. })));
    let blow = |_t: f64, y: &[f64], d: &mut [f64]| d[0] = y[0] * y[0];
    match integrate(&IvpSpec::new(&blow, 0.0, 2.0, vec![1.0])) {
        Err(CanardError::StepUnderflow { t, .. }) => assert!((t - 1.0).abs() < 1e-3),
        Err(CanardError::NonFinite { t }) => assert!((t - 1.0).abs() < 1e-3),
        other => panic!("expected a blow-up error, got {other:?}"),
    }
    let spec = IvpSpec::new(&decay, 0.0, 1.0, vec![1.0]).tolerances(0.0, 1e-10);
    assert!(integrate(&spec).unwrap_err().is_validation());
}

#[test]
fn lean_runs_keep_only_the_end_point() {
    let tr = integrate(&IvpSpec::new(&decay, 0.0, 1.0, vec![1.0]).lean()).unwrap();
    assert!(tr.segments.is_empty());
    assert_abs_diff_eq!(tr.last_state()[0], (-1.0f64).exp(), epsilon = 1e-10);
}

#[test]
fn single_precision() {
    let rhs = |_t: f32, y: &[f32], d: &mut [f32]| d[0] = -y[0];
    let tr = integrate(&IvpSpec::new(&rhs, 0.0f32, 1.0, vec![1.0]).tolerances(1e-5, 1e-6)).unwrap();
    assert!((tr.last_state()[0] - (-1.0f32).exp()).abs() < 1e-5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn linear_systems(lambda in -3.0..1.0f64, y0 in -5.0..5.0f64, t_end in 0.1..4.0f64) {
        let rhs = move |_t: f64, y: &[f64], d: &mut [f64]| d[0] = lambda * y[0];
        let tr = integrate(&IvpSpec::new(&rhs, 0.0, t_end, vec![y0])).unwrap();
        let exact = y0 * (lambda * t_end).exp();
        prop_assert!((tr.last_state()[0] - exact).abs() <= 1e-8 * exact.abs().max(1.0));
    }
}
