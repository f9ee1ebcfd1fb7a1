//! Normal-form coefficients at a canard point.

use serde::{Deserialize, Serialize};

use crate::error::{CanardError, Result};
use crate::locator::{CanardPoint, NONDEGENERACY_TOL};
use crate::scalar::Scalar;
use crate::system::{FastPartial, SlowFastSystem, SlowPartial};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeSource {
    Analytic,
    FiniteDifference,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSet<T> {
    pub c1: T,
    pub c2: T,
    pub c3: T,
    pub c4: T,
    pub c5: T,
    pub c6: T,
    pub c7: T,
    pub c8: T,
    pub a1: T,
    pub a2: T,
    pub a3: T,
    pub a4: T,
    pub source: DerivativeSource,
}

impl<T: Scalar> CoefficientSet<T> {
    /// The combination `a₁/8 − 3a₂/8 + a₃/2 + a₄/4 − a₁c₅/2 + c₅c₆ + c₆/4 − c₇`
    /// shared by the splitting integrals and the canard curves.
    pub fn splitting_sum(&self) -> T {
        let l = T::lit;
        self.a1 / l(8.0) - l(3.0) * self.a2 / l(8.0) + self.a3 / l(2.0) + self.a4 / l(4.0)
            - self.a1 * self.c5 / l(2.0)
            + self.c5 * self.c6
            + self.c6 / l(4.0)
            - self.c7
    }

    /// `c₂c₃`, negative at a Hopf-type canard point.
    pub fn c2c3(&self) -> T {
        self.c2 * self.c3
    }

    pub fn as_array(&self) -> [T; 12] {
        [
            self.c1, self.c2, self.c3, self.c4, self.c5, self.c6, self.c7, self.c8, self.a1, self.a2, self.a3, self.a4,
        ]
    }

    pub const NAMES: [&'static str; 12] = ["c1", "c2", "c3", "c4", "c5", "c6", "c7", "c8", "a1", "a2", "a3", "a4"];
}

/// Partials to use: whatever the system supplies, or finite differences only.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DerivativeMode {
    Prefer,
    FiniteDifference,
}

pub fn compute_coefficients<T: Scalar>(sys: &SlowFastSystem<T>, cp: &CanardPoint<T>) -> Result<CoefficientSet<T>> {
    compute_coefficients_with(sys, cp, DerivativeMode::Prefer)
}

pub fn compute_coefficients_with<T: Scalar>(
    sys: &SlowFastSystem<T>,
    cp: &CanardPoint<T>,
    mode: DerivativeMode,
) -> Result<CoefficientSet<T>> {
    if !cp.is_certified() {
        return Err(CanardError::Uncertified(format!("flags {:?}, residuals {:?}", cp.certified, cp.residuals)));
    }
    sys.check_params(&cp.p)?;
    let (x, y, a, p, e) = (cp.x0, cp.y0, cp.a0, cp.p.as_slice(), T::zero());
    let fd = mode == DerivativeMode::FiniteDifference;
    let fp = |d: FastPartial| if fd { sys.fast_d_fd(d, x, y, p, e) } else { sys.fast_d(d, x, y, p, e) };
    let sp = |d: SlowPartial| if fd { sys.slow_d_fd(d, x, y, a, p, e) } else { sys.slow_d(d, x, y, a, p, e) };

    let l = T::lit;
    let c1 = fp(FastPartial::XX) / l(2.0);
    let c2 = fp(FastPartial::Y);
    let c3 = sp(SlowPartial::X);
    let c4 = sp(SlowPartial::A);
    for (name, v) in [("c1", c1), ("c2", c2), ("c3", c3), ("c4", c4)] {
        if v.abs() <= l(NONDEGENERACY_TOL) || !v.is_finite() {
            return Err(CanardError::DegenerateCoefficient { name, value: v.as_f64() });
        }
    }
    let c2c3 = c2 * c3;
    let analytic = !fd && sys.fully_analytic();
    Ok(CoefficientSet {
        c1,
        c2,
        c3,
        c4,
        c5: c1 / c2c3 * fp(FastPartial::Eps),
        c6: -sp(SlowPartial::Y) / c2c3,
        c7: -c1 / (c2c3 * c3) * sp(SlowPartial::Eps),
        c8: sp(SlowPartial::XA) / (c1 * c4),
        a1: -fp(FastPartial::XY) / (c1 * c2),
        a2: -fp(FastPartial::XXX) / (l(6.0) * c1 * c1),
        a3: -fp(FastPartial::XEps) / c2c3,
        a4: -sp(SlowPartial::XX) / (l(2.0) * c1 * c3),
        source: if analytic { DerivativeSource::Analytic } else { DerivativeSource::FiniteDifference },
    })
}
