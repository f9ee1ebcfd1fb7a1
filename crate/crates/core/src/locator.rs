//! Fold points and canard points of the unforced system at ε = 0.

use serde::{Deserialize, Serialize};

use crate::error::{CanardError, Result};
use crate::scalar::Scalar;
use crate::system::{FastPartial, SlowFastSystem, SlowPartial};

/// Magnitude below which a required-nonzero derivative counts as vanishing.
pub const NONDEGENERACY_TOL: f64 = 1e-6;
const NEWTON_TOL: f64 = 1e-12;
const MAX_NEWTON: usize = 50;
const MAX_HALVINGS: usize = 10;
const CERTIFIED_RESIDUAL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Residuals<T> {
    pub f: T,
    pub f_x: T,
    pub g: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertFlags {
    pub fold_nondegenerate: bool,
    pub canard_nondegenerate: bool,
    pub hopf: bool,
}

impl CertFlags {
    pub fn all(&self) -> bool {
        self.fold_nondegenerate && self.canard_nondegenerate && self.hopf
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CanardPoint<T> {
    pub x0: T,
    pub y0: T,
    pub a0: T,
    pub p: Vec<T>,
    pub residuals: Residuals<T>,
    pub certified: CertFlags,
}

impl<T: Scalar> CanardPoint<T> {
    /// All flags set and residuals small.
    pub fn is_certified(&self) -> bool {
        let tol = T::tol(CERTIFIED_RESIDUAL, 64.0);
        self.certified.all() && self.residuals.f.abs() <= tol && self.residuals.f_x.abs() <= tol && self.residuals.g.abs() <= tol
    }
}

/// Solves `F = 0`, `F_x = 0` at ε = 0 by damped Newton.
pub fn find_fold<T: Scalar>(sys: &SlowFastSystem<T>, p: &[T], guess: (T, T)) -> Result<(T, T)> {
    sys.check_params(p)?;
    let eps = T::zero();
    let tol = T::tol(NEWTON_TOL, 64.0);
    let resid = |x: T, y: T| (sys.fast(x, y, p, eps), sys.fast_d(FastPartial::X, x, y, p, eps));
    let norm = |r: (T, T)| r.0.abs().max(r.1.abs());

    let (mut x, mut y) = guess;
    let mut r = resid(x, y);
    let mut it = 0;
    while norm(r) > tol {
        if it == MAX_NEWTON || !norm(r).is_finite() {
            return Err(CanardError::NewtonFailed { iterations: it, residual: norm(r).as_f64() });
        }
        it += 1;
        let j11 = sys.fast_d(FastPartial::X, x, y, p, eps);
        let j12 = sys.fast_d(FastPartial::Y, x, y, p, eps);
        let j21 = sys.fast_d(FastPartial::XX, x, y, p, eps);
        let j22 = sys.fast_d(FastPartial::XY, x, y, p, eps);
        let det = j11 * j22 - j12 * j21;
        let scale = (j11.abs() + j12.abs()) * (j21.abs() + j22.abs());
        if det.abs() <= T::epsilon() * scale || det == T::zero() {
            return Err(if norm(r) <= T::lit(1e-6) {
                CanardError::DegenerateFold
            } else {
                CanardError::NewtonFailed { iterations: it, residual: norm(r).as_f64() }
            });
        }
        let dx = (j22 * r.0 - j12 * r.1) / det;
        let dy = (-j21 * r.0 + j11 * r.1) / det;
        let mut lambda = T::one();
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let (xn, yn) = (x - lambda * dx, y - lambda * dy);
            let rn = resid(xn, yn);
            if norm(rn) < norm(r) {
                accepted = Some((xn, yn, rn));
                break;
            }
            lambda = lambda / T::lit(2.0);
        }
        let (xn, yn, rn) = accepted.unwrap_or_else(|| {
            let (xn, yn) = (x - lambda * dx, y - lambda * dy);
            (xn, yn, resid(xn, yn))
        });
        x = xn;
        y = yn;
        r = rn;
    }

    let tol_nd = T::lit(NONDEGENERACY_TOL);
    let fxx = sys.fast_d(FastPartial::XX, x, y, p, eps);
    let fy = sys.fast_d(FastPartial::Y, x, y, p, eps);
    if fxx.abs() <= tol_nd || fy.abs() <= tol_nd {
        return Err(CanardError::DegenerateFold);
    }
    Ok((x, y))
}

/// Non-degeneracy and Hopf checks at a candidate point.
pub fn certify<T: Scalar>(sys: &SlowFastSystem<T>, x0: T, y0: T, a0: T, p: &[T], tol: T) -> CertFlags {
    let eps = T::zero();
    let fxx = sys.fast_d(FastPartial::XX, x0, y0, p, eps);
    let fy = sys.fast_d(FastPartial::Y, x0, y0, p, eps);
    let gx = sys.slow_d(SlowPartial::X, x0, y0, a0, p, eps);
    let ga = sys.slow_d(SlowPartial::A, x0, y0, a0, p, eps);
    CertFlags {
        fold_nondegenerate: fxx.abs() > tol && fy.abs() > tol,
        canard_nondegenerate: gx.abs() > tol && ga.abs() > tol,
        hopf: fy * gx < T::zero(),
    }
}

/// Solves `F = 0`, `F_x = 0`, `G = 0` for `(x₀, y₀, a₀)` and certifies the point.
///
/// Failed non-degeneracy checks are reported through the flags, not as errors.
pub fn find_canard_point<T: Scalar>(sys: &SlowFastSystem<T>, p: &[T], guess: (T, T, T)) -> Result<CanardPoint<T>> {
    let (x0, y0) = find_fold(sys, p, (guess.0, guess.1))?;
    let eps = T::zero();
    let tol = T::tol(NEWTON_TOL, 64.0);
    let mut a = guess.2;
    let mut g = sys.slow(x0, y0, a, p, eps);
    let mut it = 0;
    while g.abs() > tol && it < MAX_NEWTON {
        let ga = sys.slow_d(SlowPartial::A, x0, y0, a, p, eps);
        if ga.abs() <= T::lit(NONDEGENERACY_TOL) || !ga.is_finite() {
            break;
        }
        a = a - g / ga;
        g = sys.slow(x0, y0, a, p, eps);
        it += 1;
    }
    if !g.is_finite() {
        return Err(CanardError::NewtonFailed { iterations: it, residual: f64::NAN });
    }
    let residuals = Residuals {
        f: sys.fast(x0, y0, p, eps).abs(),
        f_x: sys.fast_d(FastPartial::X, x0, y0, p, eps).abs(),
        g: g.abs(),
    };
    let certified = certify(sys, x0, y0, a, p, T::lit(NONDEGENERACY_TOL));
    Ok(CanardPoint { x0, y0, a0: a, p: p.to_vec(), residuals, certified })
}
