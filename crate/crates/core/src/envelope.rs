//! Analytic canard-existence curves and their envelopes in the low,
//! intermediate and unified frequency scalings.

use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientSet;
use crate::locator::CanardPoint;
use crate::scalar::Scalar;
use crate::system::Regime;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeResult<T> {
    pub a_center: T,
    pub half_width: T,
    pub a_upper: T,
    pub a_lower: T,
    pub regime: Regime,
    /// `ω̄`, `Ω` or raw `ω` depending on `regime`.
    pub frequency: T,
    pub eps: T,
    pub b: T,
    /// `ε^{3/2}`, the order of the neglected remainder.
    pub formula_uncertainty: T,
}

/// Canard value corrected to first order in ε, independent of the forcing.
pub fn a_center<T: Scalar>(c: &CoefficientSet<T>, cp: &CanardPoint<T>, eps: T) -> T {
    cp.a0 - c.c2 * c.c3 * c.c3 / (c.c1 * c.c4) * c.splitting_sum() * eps
}

fn build<T: Scalar>(
    c: &CoefficientSet<T>,
    cp: &CanardPoint<T>,
    eps: T,
    b: T,
    exponent: T,
    regime: Regime,
    frequency: T,
) -> EnvelopeResult<T> {
    let center = a_center(c, cp, eps);
    let half_width = (b / c.c4).abs() * exponent.exp();
    EnvelopeResult {
        a_center: center,
        half_width,
        a_upper: center + half_width,
        a_lower: center - half_width,
        regime,
        frequency,
        eps,
        b,
        formula_uncertainty: eps * eps.sqrt(),
    }
}

/// Low-frequency envelope, `ω = ε ω̄`.
pub fn envelope_low<T: Scalar>(c: &CoefficientSet<T>, cp: &CanardPoint<T>, eps: T, b: T, omega_bar: T) -> EnvelopeResult<T> {
    let exponent = eps * omega_bar * omega_bar / (T::lit(2.0) * c.c2 * c.c3);
    build(c, cp, eps, b, exponent, Regime::Low, omega_bar)
}

/// Intermediate-frequency envelope, `ω = √ε Ω`.
pub fn envelope_int<T: Scalar>(c: &CoefficientSet<T>, cp: &CanardPoint<T>, eps: T, b: T, big_omega: T) -> EnvelopeResult<T> {
    let exponent = big_omega * big_omega / (T::lit(2.0) * c.c2 * c.c3);
    build(c, cp, eps, b, exponent, Regime::Intermediate, big_omega)
}

/// Envelope in the raw frequency, `|b/c₄| exp(ω²/(2c₂c₃ε))`.
pub fn envelope_unified<T: Scalar>(c: &CoefficientSet<T>, cp: &CanardPoint<T>, eps: T, b: T, omega: T) -> EnvelopeResult<T> {
    let exponent = omega * omega / (T::lit(2.0) * c.c2 * c.c3 * eps);
    build(c, cp, eps, b, exponent, Regime::Unified, omega)
}

/// Dispatches on the regime.
pub fn envelope<T: Scalar>(c: &CoefficientSet<T>, cp: &CanardPoint<T>, eps: T, b: T, freq: T, regime: Regime) -> EnvelopeResult<T> {
    match regime {
        Regime::Low => envelope_low(c, cp, eps, b, freq),
        Regime::Intermediate => envelope_int(c, cp, eps, b, freq),
        Regime::Unified => envelope_unified(c, cp, eps, b, freq),
    }
}

/// Phase-resolved canard locus `a(θ₀) = a_center − (b/c₄) cos θ₀ exp(ω²/(2c₂c₃ε))`.
pub fn canard_curve<T: Scalar>(c: &CoefficientSet<T>, cp: &CanardPoint<T>, eps: T, b: T, omega: T, theta0: T) -> T {
    let damp = (omega * omega / (T::lit(2.0) * c.c2 * c.c3 * eps)).exp();
    a_center(c, cp, eps) - b / c.c4 * theta0.cos() * damp
}

/// Phases `θ₀ ∈ [0, 2π)` whose canard curve passes through `a`.
pub fn canard_phases<T: Scalar>(c: &CoefficientSet<T>, cp: &CanardPoint<T>, eps: T, b: T, omega: T, a: T) -> Vec<T> {
    let damp = (omega * omega / (T::lit(2.0) * c.c2 * c.c3 * eps)).exp();
    if b == T::zero() || damp == T::zero() {
        return Vec::new();
    }
    let cos = (a_center(c, cp, eps) - a) * c.c4 / (b * damp);
    if cos.abs() > T::one() {
        return Vec::new();
    }
    let t = cos.acos();
    if t == T::zero() || t == T::PI() {
        vec![t]
    } else {
        vec![t, T::two_pi() - t]
    }
}

/// Maps between original `(x, y, a, b, ε)` and the normal-form
/// `(u, v, ã, b̃, ε̃)`:
/// `u = −c₁(x − x₀)`, `v = −c₁c₂(y − y₀)`, `ã = (c₁c₄/c₃)(a − a₀)`,
/// `b̃ = (c₁/c₃) b`, `ε̃ = −c₂c₃ ε`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Unscaling<T> {
    pub c1: T,
    pub c2: T,
    pub c3: T,
    pub c4: T,
    pub x0: T,
    pub y0: T,
    pub a0: T,
}

impl<T: Scalar> Unscaling<T> {
    pub fn new(c: &CoefficientSet<T>, cp: &CanardPoint<T>) -> Self {
        Unscaling { c1: c.c1, c2: c.c2, c3: c.c3, c4: c.c4, x0: cp.x0, y0: cp.y0, a0: cp.a0 }
    }

    pub fn u(&self, x: T) -> T {
        -self.c1 * (x - self.x0)
    }

    pub fn v(&self, y: T) -> T {
        -self.c1 * self.c2 * (y - self.y0)
    }

    pub fn x(&self, u: T) -> T {
        self.x0 - u / self.c1
    }

    pub fn y(&self, v: T) -> T {
        self.y0 - v / (self.c1 * self.c2)
    }

    pub fn a_tilde(&self, a: T) -> T {
        self.c1 * self.c4 / self.c3 * (a - self.a0)
    }

    pub fn a(&self, a_tilde: T) -> T {
        self.a0 + self.c3 / (self.c1 * self.c4) * a_tilde
    }

    pub fn b_tilde(&self, b: T) -> T {
        self.c1 / self.c3 * b
    }

    pub fn b(&self, b_tilde: T) -> T {
        self.c3 / self.c1 * b_tilde
    }

    pub fn eps_tilde(&self, eps: T) -> T {
        -self.c2 * self.c3 * eps
    }

    pub fn eps(&self, eps_tilde: T) -> T {
        -eps_tilde / (self.c2 * self.c3)
    }
}
