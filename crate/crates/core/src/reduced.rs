//! Reduced and desingularized flow on the critical manifold, folded
//! singularities and the folded saddle-node condition.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientSet;
use crate::error::{CanardError, Result};
use crate::locator::{CanardPoint, NONDEGENERACY_TOL};
use crate::scalar::{wrap_angle, Scalar};
use crate::system::{FastPartial, SlowFastSystem, SlowPartial};

const THETA_SCAN: usize = 720;
const ROOT_TOL: f64 = 1e-12;
const ON_SET_TOL: f64 = 1e-10;
const DEGENERATE_EIG: f64 = 1e-8;

/// Solves `F(x, y, p, 0) = 0` for `y` by Newton from `y_guess`.
pub fn slow_graph<T: Scalar>(sys: &SlowFastSystem<T>, p: &[T], x: T, y_guess: T) -> Result<T> {
    let eps = T::zero();
    let tol = T::tol(1e-13, 16.0);
    let mut y = y_guess;
    for _ in 0..50 {
        let f = sys.fast(x, y, p, eps);
        if f.abs() <= tol * T::one().max(y.abs()) {
            return Ok(y);
        }
        let fy = sys.fast_d(FastPartial::Y, x, y, p, eps);
        if fy.abs() <= T::lit(NONDEGENERACY_TOL) || !fy.is_finite() {
            break;
        }
        y = y - f / fy;
        if !y.is_finite() {
            break;
        }
    }
    let f = sys.fast(x, y, p, eps);
    if f.abs() <= T::tol(1e-10, 64.0) {
        return Ok(y);
    }
    Err(CanardError::GraphSolve { x: x.as_f64() })
}

/// `(F_y (G + b cos θ), −F_x ω̄)` on `y = y_S(x)`.
pub fn desingularized_rhs<T: Scalar>(
    sys: &SlowFastSystem<T>,
    cp: &CanardPoint<T>,
    state: (T, T),
    a: T,
    b: T,
    omega_bar: T,
) -> Result<(T, T)> {
    let (x, theta) = state;
    let p = cp.p.as_slice();
    let y = slow_graph(sys, p, x, cp.y0)?;
    let e = T::zero();
    let fy = sys.fast_d(FastPartial::Y, x, y, p, e);
    let fx = sys.fast_d(FastPartial::X, x, y, p, e);
    Ok((fy * (sys.slow(x, y, a, p, e) + b * theta.cos()), -fx * omega_bar))
}

/// The desingularized field with the time direction restored on the
/// repelling sheet, so orbits follow the reduced flow.
pub fn orientation_corrected<T: Scalar>(
    sys: &SlowFastSystem<T>,
    cp: &CanardPoint<T>,
    state: (T, T),
    a: T,
    b: T,
    omega_bar: T,
) -> Result<(T, T)> {
    let (dx, dth) = desingularized_rhs(sys, cp, state, a, b, omega_bar)?;
    let y = slow_graph(sys, &cp.p, state.0, cp.y0)?;
    let fx = sys.fast_d(FastPartial::X, state.0, y, &cp.p, T::zero());
    Ok(if fx > T::zero() { (-dx, -dth) } else { (dx, dth) })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SingularityClass {
    Node,
    Saddle,
    Focus,
    /// Zero eigenvalue: a folded saddle-node.
    Degenerate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldedSingularity<T> {
    pub x: T,
    pub y: T,
    pub theta: T,
    pub class: SingularityClass,
    pub eigenvalues: [Complex<T>; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldedSingularities<T> {
    pub points: Vec<FoldedSingularity<T>>,
    /// `b = 0` with `G = 0` on the fold: every point of the fold circle is singular.
    pub degenerate_ring: bool,
}

/// Eigenvalues of a real 2×2 matrix given by trace and determinant.
pub fn eigenvalues_2x2<T: Scalar>(tr: T, det: T) -> [Complex<T>; 2] {
    let half = tr / T::lit(2.0);
    let disc = half * half - det;
    if disc >= T::zero() {
        let s = disc.sqrt();
        // Avoid cancellation for the smaller root.
        let big = if half >= T::zero() { half + s } else { half - s };
        let small = if big != T::zero() { det / big } else { T::zero() };
        [Complex::new(big, T::zero()), Complex::new(small, T::zero())]
    } else {
        let s = (-disc).sqrt();
        [Complex::new(half, s), Complex::new(half, -s)]
    }
}

pub fn classify<T: Scalar>(eig: &[Complex<T>; 2]) -> SingularityClass {
    let tol = T::lit(DEGENERATE_EIG);
    if eig.iter().any(|l| l.norm() <= tol) {
        SingularityClass::Degenerate
    } else if eig[0].im != T::zero() {
        SingularityClass::Focus
    } else if eig[0].re * eig[1].re > T::zero() {
        SingularityClass::Node
    } else {
        SingularityClass::Saddle
    }
}

/// Trace–determinant classification, equivalent to [`classify`] away from the
/// degenerate threshold.
pub fn classify_trace_det<T: Scalar>(tr: T, det: T) -> SingularityClass {
    let tol = T::lit(DEGENERATE_EIG);
    let eig = eigenvalues_2x2(tr, det);
    if eig.iter().any(|l| l.norm() <= tol) {
        return SingularityClass::Degenerate;
    }
    if det < T::zero() {
        SingularityClass::Saddle
    } else if tr * tr < T::lit(4.0) * det {
        SingularityClass::Focus
    } else {
        SingularityClass::Node
    }
}

/// Jacobian of the desingularized field at a point on the fold where
/// `G + b cos θ = 0`.
pub fn desingularized_jacobian<T: Scalar>(
    sys: &SlowFastSystem<T>,
    x: T,
    y: T,
    theta: T,
    a: T,
    b: T,
    omega_bar: T,
    p: &[T],
) -> [[T; 2]; 2] {
    let e = T::zero();
    let fx = sys.fast_d(FastPartial::X, x, y, p, e);
    let fy = sys.fast_d(FastPartial::Y, x, y, p, e);
    let fxx = sys.fast_d(FastPartial::XX, x, y, p, e);
    let fxy = sys.fast_d(FastPartial::XY, x, y, p, e);
    let gx = sys.slow_d(SlowPartial::X, x, y, a, p, e);
    let gy = sys.slow_d(SlowPartial::Y, x, y, a, p, e);
    let ys = -fx / fy;
    [[fy * (gx + gy * ys), -fy * b * theta.sin()], [-omega_bar * (fxx + fxy * ys), T::zero()]]
}

/// All solutions of `G(x₀, y₀, a) + b cos θ = 0` on the fold circle.
pub fn find_folded_singularities<T: Scalar>(
    sys: &SlowFastSystem<T>,
    cp: &CanardPoint<T>,
    a: T,
    b: T,
    omega_bar: T,
) -> Result<FoldedSingularities<T>> {
    if !a.is_finite() || !b.is_finite() || !omega_bar.is_finite() {
        return Err(CanardError::Validation("non-finite a, b or frequency".into()));
    }
    let p = cp.p.as_slice();
    let (x, y) = (cp.x0, cp.y0);
    let g0 = sys.slow(x, y, a, p, T::zero());
    if b == T::zero() {
        let ring = g0.abs() <= T::tol(ON_SET_TOL, 64.0);
        return Ok(FoldedSingularities { points: Vec::new(), degenerate_ring: ring });
    }
    let h = |th: T| g0 + b * th.cos();
    let thetas = theta_roots(&h, b.abs());
    let points = thetas
        .into_iter()
        .map(|th| {
            let j = desingularized_jacobian(sys, x, y, th, a, b, omega_bar, p);
            let tr = j[0][0] + j[1][1];
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            let eig = eigenvalues_2x2(tr, det);
            FoldedSingularity { x, y, theta: th, class: classify(&eig), eigenvalues: eig }
        })
        .collect();
    Ok(FoldedSingularities { points, degenerate_ring: false })
}

fn theta_roots<T: Scalar>(h: &impl Fn(T) -> T, scale: T) -> Vec<T> {
    let n = THETA_SCAN;
    let dth = T::two_pi() / T::lit(n as f64);
    let th = |k: isize| T::lit(k as f64) * dth;
    let vals: Vec<T> = (0..n).map(|k| h(th(k as isize))).collect();
    let at = |k: isize| vals[k.rem_euclid(n as isize) as usize];
    let tol = T::tol(ON_SET_TOL, 64.0) * T::one().max(scale);
    let mut roots = Vec::new();

    for k in 0..n as isize {
        let (hk, hn) = (at(k), at(k + 1));
        if hk == T::zero() {
            roots.push(th(k));
        } else if hk * hn < T::zero() {
            roots.push(bisect(h, th(k), th(k + 1)));
        }
    }
    // Tangential or closely paired roots between scan points.
    for k in 0..n as isize {
        let (hp, hk, hn) = (at(k - 1), at(k), at(k + 1));
        let same = hp * hk > T::zero() && hk * hn > T::zero();
        if !(same && hk.abs() < hp.abs() && hk.abs() <= hn.abs()) {
            continue;
        }
        let lo = th(k - 1);
        let hi = th(k + 1);
        let tstar = golden_min(|t| h(t).abs(), lo, hi);
        let hs = h(tstar);
        if hs.abs() <= tol {
            roots.push(tstar);
        } else if hs * hk < T::zero() {
            roots.push(bisect(h, lo, tstar));
            roots.push(bisect(h, tstar, hi));
        }
    }

    let mut wrapped: Vec<T> = roots.into_iter().map(wrap_angle).collect();
    wrapped.sort_by(|p, q| p.partial_cmp(q).unwrap_or(std::cmp::Ordering::Equal));
    let mut out: Vec<T> = Vec::new();
    let sep = T::lit(1e-9);
    for r in wrapped {
        let dup = out.iter().any(|&q| {
            let d = (r - q).abs();
            d <= sep || (T::two_pi() - d) <= sep
        });
        if !dup {
            out.push(r);
        }
    }
    out
}

fn bisect<T: Scalar>(h: &impl Fn(T) -> T, mut lo: T, mut hi: T) -> T {
    let mut hlo = h(lo);
    let tol = T::tol(ROOT_TOL, 8.0);
    while (hi - lo).abs() > tol {
        let mid = (lo + hi) / T::lit(2.0);
        if mid == lo || mid == hi {
            break;
        }
        let hm = h(mid);
        if hm == T::zero() {
            return mid;
        }
        if (hm < T::zero()) == (hlo < T::zero()) {
            lo = mid;
            hlo = hm;
        } else {
            hi = mid;
        }
    }
    (lo + hi) / T::lit(2.0)
}

fn golden_min<T: Scalar>(f: impl Fn(T) -> T, mut lo: T, mut hi: T) -> T {
    let r = T::lit(0.618_033_988_749_894_8);
    let mut c = hi - r * (hi - lo);
    let mut d = lo + r * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    let tol = T::tol(ROOT_TOL, 8.0);
    for _ in 0..200 {
        if (hi - lo).abs() <= tol {
            break;
        }
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - r * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + r * (hi - lo);
            fd = f(d);
        }
    }
    (lo + hi) / T::lit(2.0)
}

/// `a_fsn = a₀ − b/c₄`, where the folded node and saddle merge.
pub fn fsn_parameter<T: Scalar>(cset: &CoefficientSet<T>, cp: &CanardPoint<T>, b: T) -> Result<T> {
    if cset.c4.abs() <= T::lit(NONDEGENERACY_TOL) {
        return Err(CanardError::DegenerateCoefficient { name: "c4", value: cset.c4.as_f64() });
    }
    Ok(cp.a0 - b / cset.c4)
}
