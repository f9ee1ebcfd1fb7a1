//! Rescaling-chart Hamiltonian system, its heteroclinic orbit and the
//! splitting (Melnikov) integrals, both by quadrature and in closed form.

use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientSet;
use crate::envelope::Unscaling;
use crate::error::{CanardError, Result};
use crate::locator::CanardPoint;
use crate::quadrature::{integrate_truncated, QuadratureSpec};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianState<T> {
    pub u2: T,
    pub v2: T,
}

impl<T: Scalar> HamiltonianState<T> {
    pub fn new(u2: T, v2: T) -> Self {
        HamiltonianState { u2, v2 }
    }
}

/// `H = e^{−2v}(u² − v − 1/2 − c₅)`
pub fn hamiltonian<T: Scalar>(s: HamiltonianState<T>, c5: T) -> T {
    (T::lit(-2.0) * s.v2).exp() * (s.u2 * s.u2 - s.v2 - T::lit(0.5) - c5)
}

/// `(∂H/∂u, ∂H/∂v) = (2u e^{−2v}, e^{−2v}(−2u² + 2v + 2c₅))`
pub fn hamiltonian_gradient<T: Scalar>(s: HamiltonianState<T>, c5: T) -> (T, T) {
    let w = (T::lit(-2.0) * s.v2).exp();
    let two = T::lit(2.0);
    (two * s.u2 * w, w * (-two * s.u2 * s.u2 + two * s.v2 + two * c5))
}

/// `u' = v − u² + c₅`, `v' = −u`
pub fn unperturbed_rhs<T: Scalar>(s: HamiltonianState<T>, c5: T) -> (T, T) {
    (s.v2 - s.u2 * s.u2 + c5, -s.u2)
}

/// The heteroclinic `Γ(t) = (−t/2, t²/4 − 1/2 − c₅)` on `{H = 0}`.
pub fn gamma<T: Scalar>(t2: T, c5: T) -> HamiltonianState<T> {
    let q = t2 * t2 / T::lit(4.0);
    HamiltonianState { u2: -t2 / T::lit(2.0), v2: q - T::lit(0.5) - c5 }
}

/// `dΓ/dt = (−1/2, t/2)`
pub fn gamma_velocity<T: Scalar>(t2: T) -> (T, T) {
    (T::lit(-0.5), t2 / T::lit(2.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "lowercase")]
pub enum BlowupScaledParams<T> {
    /// `ã = √ε̃ α`, `b̃ = √ε̃ β`, `ã + b̃ = ε̃ γ`, `ε̃ = r₂⁴`.
    Low { alpha: T, beta: T, gamma: T, theta0: T, r2: T, omega_bar: T },
    /// `ã = ε̃ α̃`, `b̃ = ε̃ β̃`, `ε̃ = r₂²`.
    Intermediate { alpha_t: T, beta_t: T, theta0: T, r2: T, big_omega: T },
}

impl<T: Scalar> BlowupScaledParams<T> {
    pub fn eps_tilde(&self) -> T {
        match *self {
            BlowupScaledParams::Low { r2, .. } => r2.powi(4),
            BlowupScaledParams::Intermediate { r2, .. } => r2 * r2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (vals, r2): (Vec<T>, T) = match *self {
            BlowupScaledParams::Low { alpha, beta, gamma, theta0, r2, omega_bar } => {
                (vec![alpha, beta, gamma, theta0, r2, omega_bar], r2)
            }
            BlowupScaledParams::Intermediate { alpha_t, beta_t, theta0, r2, big_omega } => {
                (vec![alpha_t, beta_t, theta0, r2, big_omega], r2)
            }
        };
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(CanardError::Validation("non-finite scaled parameter".into()));
        }
        if r2 < T::zero() {
            return Err(CanardError::Validation("r2 must be >= 0".into()));
        }
        Ok(())
    }

    /// Low-frequency scaled parameters of a physical `(a, b, ε, ω̄, θ₀)`.
    pub fn low_from_physical(u: &Unscaling<T>, a: T, b: T, eps: T, omega_bar: T, theta0: T) -> Self {
        let et = u.eps_tilde(eps);
        let (at, bt) = (u.a_tilde(a), u.b_tilde(b));
        let s = et.sqrt();
        BlowupScaledParams::Low { alpha: at / s, beta: bt / s, gamma: (at + bt) / et, theta0, r2: s.sqrt(), omega_bar }
    }

    /// Intermediate-frequency scaled parameters of a physical `(a, b, ε, Ω, θ₀)`.
    pub fn intermediate_from_physical(u: &Unscaling<T>, a: T, b: T, eps: T, big_omega: T, theta0: T) -> Self {
        let et = u.eps_tilde(eps);
        BlowupScaledParams::Intermediate {
            alpha_t: u.a_tilde(a) / et,
            beta_t: u.b_tilde(b) / et,
            theta0,
            r2: et.sqrt(),
            big_omega,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MelnikovLow<T> {
    pub d_r2sq_numeric: T,
    pub d_r2sq_closed: T,
    pub d_r2cube_numeric: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MelnikovInt<T> {
    pub d_r2_numeric: T,
    pub d_r2_closed: T,
}

fn low_frequency_in_t<T: Scalar>(c: &CoefficientSet<T>, r2: T, omega_bar: T) -> T {
    -r2 * r2 * omega_bar / (c.c2 * c.c3)
}

/// Perturbation common to both regimes' first slot.
fn first_slot<T: Scalar>(c: &CoefficientSet<T>, s: HamiltonianState<T>) -> T {
    let (u, v) = (s.u2, s.v2);
    c.a1 * u * v - c.a2 * u * u * u + c.a3 * u
}

/// Integrands of the two low-frequency splitting integrals at time `t`.
pub fn low_integrands<T: Scalar>(c: &CoefficientSet<T>, prm: &BlowupScaledParams<T>, t: T) -> Result<(T, T)> {
    let BlowupScaledParams::Low { alpha, beta, gamma: g, theta0, r2, omega_bar } = *prm else {
        return Err(CanardError::WrongRegime { expected: "low" });
    };
    let s = gamma(t, c.c5);
    let (hu, hv) = hamiltonian_gradient(s, c.c5);
    let k = low_frequency_in_t(c, r2, omega_bar);
    let forcing = if beta == T::zero() { T::zero() } else { beta / (r2 * r2) };
    let (u, v) = (s.u2, s.v2);
    let g2 = -c.a4 * u * u - c.c8 * u * alpha + c.c6 * v + c.c7 + g + forcing * ((k * t).cos() * theta0.cos() - T::one());
    let d2 = hu * first_slot(c, s) + hv * g2;
    let d3 = hv * (-forcing * (k * t).sin() * theta0.sin());
    Ok((d2, d3))
}

/// Integrand of the intermediate-frequency splitting integral at time `t`.
pub fn int_integrand<T: Scalar>(c: &CoefficientSet<T>, prm: &BlowupScaledParams<T>, t: T) -> Result<T> {
    let BlowupScaledParams::Intermediate { alpha_t, beta_t, theta0, big_omega, .. } = *prm else {
        return Err(CanardError::WrongRegime { expected: "intermediate" });
    };
    let s = gamma(t, c.c5);
    let (hu, hv) = hamiltonian_gradient(s, c.c5);
    let k = big_omega / (-c.c2 * c.c3).sqrt();
    let (u, v) = (s.u2, s.v2);
    let g2 = -c.a4 * u * u + alpha_t + c.c6 * v + c.c7 + beta_t * (k * t + theta0).cos();
    Ok(hu * first_slot(c, s) + hv * g2)
}

fn check_coefficients<T: Scalar>(c: &CoefficientSet<T>) -> Result<()> {
    if !(c.c2 * c.c3 < T::zero()) {
        return Err(CanardError::Validation("splitting integrals need c2*c3 < 0".into()));
    }
    Ok(())
}

/// Splitting distance `D = ∫ ∇H|_Γ · g dt` at orders r₂² and r₂³, low frequency.
pub fn melnikov_low<T: Scalar>(
    c: &CoefficientSet<T>,
    prm: &BlowupScaledParams<T>,
    quad: &QuadratureSpec<T>,
) -> Result<MelnikovLow<T>> {
    prm.validate()?;
    check_coefficients(c)?;
    let BlowupScaledParams::Low { r2, omega_bar, beta, .. } = *prm else {
        return Err(CanardError::WrongRegime { expected: "low" });
    };
    if beta != T::zero() && r2 == T::zero() {
        return Err(CanardError::Validation("low regime forcing needs r2 > 0".into()));
    }
    let k = low_frequency_in_t(c, r2, omega_bar);
    let d2 = integrate_truncated(|t| low_integrands(c, prm, t).map(|v| v.0).unwrap_or(T::nan()), k, quad)?;
    let d3 = integrate_truncated(|t| low_integrands(c, prm, t).map(|v| v.1).unwrap_or(T::nan()), k, quad)?;
    Ok(MelnikovLow { d_r2sq_numeric: d2, d_r2sq_closed: melnikov_low_closed(c, prm)?, d_r2cube_numeric: d3 })
}

/// Splitting distance at order r₂, intermediate frequency.
pub fn melnikov_int<T: Scalar>(
    c: &CoefficientSet<T>,
    prm: &BlowupScaledParams<T>,
    quad: &QuadratureSpec<T>,
) -> Result<MelnikovInt<T>> {
    prm.validate()?;
    check_coefficients(c)?;
    let BlowupScaledParams::Intermediate { big_omega, .. } = *prm else {
        return Err(CanardError::WrongRegime { expected: "intermediate" });
    };
    let k = big_omega / (-c.c2 * c.c3).sqrt();
    let d = integrate_truncated(|t| int_integrand(c, prm, t).unwrap_or(T::nan()), k, quad)?;
    Ok(MelnikovInt { d_r2_numeric: d, d_r2_closed: melnikov_int_closed(c, prm)? })
}

/// `e^{1+2c₅}√(2π)(a₁/8 − 3a₂/8 + a₃/2 + a₄/4 − a₁c₅/2 + c₅c₆ + c₆/4 − c₇ − γ
///  − (β/r₂²)(e^{−r₂⁴ω̄²/(2c₂²c₃²)} cos θ₀ − 1))`
pub fn melnikov_low_closed<T: Scalar>(c: &CoefficientSet<T>, prm: &BlowupScaledParams<T>) -> Result<T> {
    let BlowupScaledParams::Low { beta, gamma: g, theta0, r2, omega_bar, .. } = *prm else {
        return Err(CanardError::WrongRegime { expected: "low" });
    };
    let l = T::lit;
    let pre = (T::one() + l(2.0) * c.c5).exp() * (l(2.0) * T::PI()).sqrt();
    let poly = c.a1 / l(8.0) - l(3.0) * c.a2 / l(8.0) + c.a3 / l(2.0) + c.a4 / l(4.0) - c.a1 * c.c5 / l(2.0)
        + c.c5 * c.c6
        + c.c6 / l(4.0)
        - c.c7;
    let forcing = if beta == T::zero() {
        T::zero()
    } else {
        let damp = (-r2.powi(4) * omega_bar * omega_bar / (l(2.0) * c.c2 * c.c2 * c.c3 * c.c3)).exp();
        beta / (r2 * r2) * (damp * theta0.cos() - T::one())
    };
    Ok(pre * (poly - g - forcing))
}

/// `e^{1+2c₅}√(2π)(a₁/8 − 3a₂/8 + a₃/2 + a₄/4 − a₁c₅/2 + c₅c₆ + c₆/4 − c₇ − α̃
///  − β̃ e^{Ω²/(2c₂c₃)} cos θ₀)`
pub fn melnikov_int_closed<T: Scalar>(c: &CoefficientSet<T>, prm: &BlowupScaledParams<T>) -> Result<T> {
    let BlowupScaledParams::Intermediate { alpha_t, beta_t, theta0, big_omega, .. } = *prm else {
        return Err(CanardError::WrongRegime { expected: "intermediate" });
    };
    let l = T::lit;
    let pre = (T::one() + l(2.0) * c.c5).exp() * (l(2.0) * T::PI()).sqrt();
    let poly = c.a1 / l(8.0) - l(3.0) * c.a2 / l(8.0) + c.a3 / l(2.0) + c.a4 / l(4.0) - c.a1 * c.c5 / l(2.0)
        + c.c5 * c.c6
        + c.c6 / l(4.0)
        - c.c7;
    let damp = (big_omega * big_omega / (l(2.0) * c.c2 * c.c3)).exp();
    Ok(pre * (poly - alpha_t - beta_t * damp * theta0.cos()))
}

/// Physical `a` at which the closed-form splitting distance vanishes for
/// phase `θ₀`. The closed form is affine in `a`, so two evaluations suffice.
pub fn closed_form_zero<T: Scalar>(
    c: &CoefficientSet<T>,
    cp: &CanardPoint<T>,
    eps: T,
    b: T,
    freq: T,
    theta0: T,
    intermediate: bool,
) -> Result<T> {
    let u = Unscaling::new(c, cp);
    let eval = |a: T| {
        if intermediate {
            melnikov_int_closed(c, &BlowupScaledParams::intermediate_from_physical(&u, a, b, eps, freq, theta0))
        } else {
            melnikov_low_closed(c, &BlowupScaledParams::low_from_physical(&u, a, b, eps, freq, theta0))
        }
    };
    let (a0, a1) = (cp.a0, cp.a0 + eps);
    let (d0, d1) = (eval(a0)?, eval(a1)?);
    if d1 == d0 {
        return Err(CanardError::Validation("closed form does not depend on a".into()));
    }
    Ok(a0 - d0 * (a1 - a0) / (d1 - d0))
}
