//! Forced planar slow/fast systems
//!
//! ```text
//! x' = F(x, y, p, ε)
//! y' = ε (G(x, y, a, p, ε) + b cos θ)
//! θ' = ω
//! ```
//!
//! plus the built-in van der Pol and FitzHugh–Nagumo examples and the two
//! equivalent Liénard representations.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{CanardError, Result};
use crate::scalar::Scalar;

/// Fast-velocity evaluator `(x, y, p, ε) -> value`.
pub type FastFn<T> = Arc<dyn Fn(T, T, &[T], T) -> T + Send + Sync>;
/// Slow-velocity evaluator `(x, y, a, p, ε) -> value`.
pub type SlowFn<T> = Arc<dyn Fn(T, T, T, &[T], T) -> T + Send + Sync>;

/// Partial derivatives of F that the normal form needs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FastPartial {
    X,
    Y,
    XX,
    XXX,
    XY,
    Eps,
    XEps,
}

impl FastPartial {
    pub const ALL: [FastPartial; 7] = [
        FastPartial::X,
        FastPartial::Y,
        FastPartial::XX,
        FastPartial::XXX,
        FastPartial::XY,
        FastPartial::Eps,
        FastPartial::XEps,
    ];

    fn index(self) -> usize {
        self as usize
    }
}

/// Partial derivatives of G that the normal form needs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SlowPartial {
    X,
    Y,
    A,
    Eps,
    XX,
    XA,
}

impl SlowPartial {
    pub const ALL: [SlowPartial; 6] = [
        SlowPartial::X,
        SlowPartial::Y,
        SlowPartial::A,
        SlowPartial::Eps,
        SlowPartial::XX,
        SlowPartial::XA,
    ];

    fn index(self) -> usize {
        self as usize
    }
}

/// Frequency scaling used to interpret a forcing frequency.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// `ω = ε ω̄`
    Low,
    /// `ω = √ε Ω`
    Intermediate,
    /// raw `ω`
    Unified,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Regime::Low => "low",
            Regime::Intermediate => "intermediate",
            Regime::Unified => "unified",
        };
        f.write_str(s)
    }
}

/// A forced planar slow/fast system. Evaluators must be pure.
#[derive(Clone)]
pub struct SlowFastSystem<T> {
    name: String,
    p_dim: usize,
    params: Vec<T>,
    fast: FastFn<T>,
    slow: SlowFn<T>,
    fast_partials: [Option<FastFn<T>>; 7],
    slow_partials: [Option<SlowFn<T>>; 6],
}

impl<T: Scalar> fmt::Debug for SlowFastSystem<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SlowFastSystem")
            .field("name", &self.name)
            .field("p_dim", &self.p_dim)
            .field("params", &self.params)
            .finish_non_exhaustive()
    }
}

impl<T: Scalar> SlowFastSystem<T> {
    pub fn new<F, G>(name: impl Into<String>, p_dim: usize, fast: F, slow: G) -> Self
    where
        F: Fn(T, T, &[T], T) -> T + Send + Sync + 'static,
        G: Fn(T, T, T, &[T], T) -> T + Send + Sync + 'static,
    {
        SlowFastSystem {
            name: name.into(),
            p_dim,
            params: vec![T::zero(); p_dim],
            fast: Arc::new(fast),
            slow: Arc::new(slow),
            fast_partials: Default::default(),
            slow_partials: Default::default(),
        }
    }

    pub fn with_fast_partial<F>(mut self, which: FastPartial, f: F) -> Self
    where
        F: Fn(T, T, &[T], T) -> T + Send + Sync + 'static,
    {
        self.fast_partials[which.index()] = Some(Arc::new(f));
        self
    }

    pub fn with_slow_partial<G>(mut self, which: SlowPartial, g: G) -> Self
    where
        G: Fn(T, T, T, &[T], T) -> T + Send + Sync + 'static,
    {
        self.slow_partials[which.index()] = Some(Arc::new(g));
        self
    }

    /// Sets the default parameter vector.
    pub fn with_params(mut self, params: Vec<T>) -> Result<Self> {
        self.check_params(&params)?;
        self.params = params;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn p_dim(&self) -> usize {
        self.p_dim
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn check_params(&self, p: &[T]) -> Result<()> {
        if p.len() != self.p_dim {
            return Err(CanardError::Validation(format!(
                "system {} expects {} parameters, got {}",
                self.name,
                self.p_dim,
                p.len()
            )));
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(CanardError::Validation("non-finite parameter".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn fast(&self, x: T, y: T, p: &[T], eps: T) -> T {
        (self.fast)(x, y, p, eps)
    }

    #[inline]
    pub fn slow(&self, x: T, y: T, a: T, p: &[T], eps: T) -> T {
        (self.slow)(x, y, a, p, eps)
    }

    pub fn has_fast_partial(&self, which: FastPartial) -> bool {
        self.fast_partials[which.index()].is_some()
    }

    pub fn has_slow_partial(&self, which: SlowPartial) -> bool {
        self.slow_partials[which.index()].is_some()
    }

    /// True when every partial is supplied analytically.
    pub fn fully_analytic(&self) -> bool {
        self.fast_partials.iter().all(Option::is_some) && self.slow_partials.iter().all(Option::is_some)
    }

    /// Analytic partial when supplied, finite-difference estimate otherwise.
    #[inline]
    pub fn fast_d(&self, which: FastPartial, x: T, y: T, p: &[T], eps: T) -> T {
        match &self.fast_partials[which.index()] {
            Some(f) => f(x, y, p, eps),
            None => self.fast_d_fd(which, x, y, p, eps),
        }
    }

    #[inline]
    pub fn slow_d(&self, which: SlowPartial, x: T, y: T, a: T, p: &[T], eps: T) -> T {
        match &self.slow_partials[which.index()] {
            Some(g) => g(x, y, a, p, eps),
            None => self.slow_d_fd(which, x, y, a, p, eps),
        }
    }

    /// Central finite-difference estimate of a partial of F, ignoring any analytic one.
    pub fn fast_d_fd(&self, which: FastPartial, x: T, y: T, p: &[T], eps: T) -> T {
        let f = |x: T, y: T, e: T| self.fast(x, y, p, e);
        match which {
            FastPartial::X => d1(|s| f(s, y, eps), x),
            FastPartial::Y => d1(|s| f(x, s, eps), y),
            FastPartial::Eps => d1(|s| f(x, y, s), eps),
            FastPartial::XX => d2(|s| f(s, y, eps), x),
            FastPartial::XXX => d3(|s| f(s, y, eps), x),
            FastPartial::XY => d11(|s, t| f(s, t, eps), x, y),
            FastPartial::XEps => d11(|s, t| f(s, y, t), x, eps),
        }
    }

    pub fn slow_d_fd(&self, which: SlowPartial, x: T, y: T, a: T, p: &[T], eps: T) -> T {
        let g = |x: T, y: T, a: T, e: T| self.slow(x, y, a, p, e);
        match which {
            SlowPartial::X => d1(|s| g(s, y, a, eps), x),
            SlowPartial::Y => d1(|s| g(x, s, a, eps), y),
            SlowPartial::A => d1(|s| g(x, y, s, eps), a),
            SlowPartial::Eps => d1(|s| g(x, y, a, s), eps),
            SlowPartial::XX => d2(|s| g(s, y, a, eps), x),
            SlowPartial::XA => d11(|s, t| g(s, y, t, eps), x, a),
        }
    }

    /// The forced vector field on `(x, y, θ)` with raw frequency `omega`.
    pub fn forced_rhs<'a>(
        &'a self,
        p: &'a [T],
        a: T,
        b: T,
        omega: T,
        eps: T,
    ) -> impl Fn(T, &[T], &mut [T]) + Send + Sync + 'a {
        move |_t, s, ds| {
            ds[0] = self.fast(s[0], s[1], p, eps);
            ds[1] = eps * (self.slow(s[0], s[1], a, p, eps) + b * s[2].cos());
            ds[2] = omega;
        }
    }
}

fn fd_step<T: Scalar>(x: T, base: f64, root: i32) -> T {
    let floor = T::lit(base).max(T::epsilon().powf(T::one() / T::lit(root as f64)));
    floor * T::one().max(x.abs())
}

fn d1<T: Scalar>(f: impl Fn(T) -> T, x: T) -> T {
    let h = fd_step(x, 1e-5, 2);
    (f(x + h) - f(x - h)) / (h + h)
}

fn d2<T: Scalar>(f: impl Fn(T) -> T, x: T) -> T {
    let h = fd_step(x, 1e-4, 4);
    (f(x + h) - T::lit(2.0) * f(x) + f(x - h)) / (h * h)
}

fn d3<T: Scalar>(f: impl Fn(T) -> T, x: T) -> T {
    let h = fd_step(x, 1e-3, 5);
    let two = T::lit(2.0);
    (f(x + two * h) - two * f(x + h) + two * f(x - h) - f(x - two * h)) / (two * h * h * h)
}

fn d11<T: Scalar>(f: impl Fn(T, T) -> T, x: T, y: T) -> T {
    let h = fd_step(x, 1e-4, 4);
    let k = fd_step(y, 1e-4, 4);
    (f(x + h, y + k) - f(x + h, y - k) - f(x - h, y + k) + f(x - h, y - k)) / (T::lit(4.0) * h * k)
}

/// Forced van der Pol: `F = y − x³/3 + x`, `G = −x + a`, no parameters.
pub fn builtin_vdp<T: Scalar>() -> SlowFastSystem<T> {
    let three = T::lit(3.0);
    SlowFastSystem::new(
        "vdp",
        0,
        move |x: T, y: T, _p: &[T], _e: T| y - x * x * x / three + x,
        |x: T, _y: T, a: T, _p: &[T], _e: T| a - x,
    )
    .with_fast_partial(FastPartial::X, |x, _, _, _| T::one() - x * x)
    .with_fast_partial(FastPartial::Y, |_, _, _, _| T::one())
    .with_fast_partial(FastPartial::XX, |x, _, _, _| T::lit(-2.0) * x)
    .with_fast_partial(FastPartial::XXX, |_, _, _, _| T::lit(-2.0))
    .with_fast_partial(FastPartial::XY, |_, _, _, _| T::zero())
    .with_fast_partial(FastPartial::Eps, |_, _, _, _| T::zero())
    .with_fast_partial(FastPartial::XEps, |_, _, _, _| T::zero())
    .with_slow_partial(SlowPartial::X, |_, _, _, _, _| -T::one())
    .with_slow_partial(SlowPartial::Y, |_, _, _, _, _| T::zero())
    .with_slow_partial(SlowPartial::A, |_, _, _, _, _| T::one())
    .with_slow_partial(SlowPartial::Eps, |_, _, _, _, _| T::zero())
    .with_slow_partial(SlowPartial::XX, |_, _, _, _, _| T::zero())
    .with_slow_partial(SlowPartial::XA, |_, _, _, _, _| T::zero())
}

/// Forced FitzHugh–Nagumo: `F = x − x³/3 − y + I`, `G = x + a − c y`, `p = (I, c)`.
pub fn builtin_fhn<T: Scalar>(i_app: T, c: T) -> SlowFastSystem<T> {
    let three = T::lit(3.0);
    let sys = SlowFastSystem::new(
        "fhn",
        2,
        move |x: T, y: T, p: &[T], _e: T| x - x * x * x / three - y + p[0],
        |x: T, y: T, a: T, p: &[T], _e: T| x + a - p[1] * y,
    )
    .with_fast_partial(FastPartial::X, |x, _, _, _| T::one() - x * x)
    .with_fast_partial(FastPartial::Y, |_, _, _, _| -T::one())
    .with_fast_partial(FastPartial::XX, |x, _, _, _| T::lit(-2.0) * x)
    .with_fast_partial(FastPartial::XXX, |_, _, _, _| T::lit(-2.0))
    .with_fast_partial(FastPartial::XY, |_, _, _, _| T::zero())
    .with_fast_partial(FastPartial::Eps, |_, _, _, _| T::zero())
    .with_fast_partial(FastPartial::XEps, |_, _, _, _| T::zero())
    .with_slow_partial(SlowPartial::X, |_, _, _, _, _| T::one())
    .with_slow_partial(SlowPartial::Y, |_, _, _, p: &[T], _| -p[1])
    .with_slow_partial(SlowPartial::A, |_, _, _, _, _| T::one())
    .with_slow_partial(SlowPartial::Eps, |_, _, _, _, _| T::zero())
    .with_slow_partial(SlowPartial::XX, |_, _, _, _, _| T::zero())
    .with_slow_partial(SlowPartial::XA, |_, _, _, _, _| T::zero());
    sys.with_params(vec![i_app, c]).expect("two finite parameters")
}

/// Forcing amplitude, frequency and timescale ratio.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForcingConfig<T> {
    pub b: T,
    /// `ω̄`, `Ω` or raw `ω` depending on `regime`.
    pub omega: T,
    pub eps: T,
    pub regime: Regime,
}

impl<T: Scalar> ForcingConfig<T> {
    pub fn new(b: T, omega: T, eps: T, regime: Regime) -> Result<Self> {
        if !(b >= T::zero()) || !b.is_finite() {
            return Err(CanardError::Validation("forcing amplitude b must be finite and >= 0".into()));
        }
        if !(omega >= T::zero()) || !omega.is_finite() {
            return Err(CanardError::Validation("forcing frequency must be finite and >= 0".into()));
        }
        if !(eps > T::zero()) || eps >= T::one() {
            return Err(CanardError::Validation("eps must lie in (0, 1)".into()));
        }
        Ok(ForcingConfig { b, omega, eps, regime })
    }

    /// Frequency in the original time.
    pub fn raw_omega(&self) -> T {
        match self.regime {
            Regime::Low => self.eps * self.omega,
            Regime::Intermediate => self.eps.sqrt() * self.omega,
            Regime::Unified => self.omega,
        }
    }
}

pub type LienardF<T> = Arc<dyn Fn(T, &[T], T) -> T + Send + Sync>;
pub type LienardG<T> = Arc<dyn Fn(T, T, T, &[T], T) -> T + Send + Sync>;

/// `u'' + f(u)' + ε̃ g(u, u') = ε̃ b̃ cos ωτ`
#[derive(Clone)]
pub struct LienardDef<T> {
    /// `f(u, p, ε̃)`
    pub f: LienardF<T>,
    /// `g(u, du/dτ, a, p, ε̃)`
    pub g: LienardG<T>,
    pub b: T,
    pub omega: T,
    pub eps: T,
    pub a: T,
    pub p: Vec<T>,
}

impl<T: Scalar> LienardDef<T> {
    pub fn new<F, G>(f: F, g: G, a: T, p: Vec<T>, b: T, omega: T, eps: T) -> Self
    where
        F: Fn(T, &[T], T) -> T + Send + Sync + 'static,
        G: Fn(T, T, T, &[T], T) -> T + Send + Sync + 'static,
    {
        LienardDef { f: Arc::new(f), g: Arc::new(g), b, omega, eps, a, p }
    }

    #[inline]
    pub fn f_at(&self, u: T) -> T {
        (self.f)(u, &self.p, self.eps)
    }

    #[inline]
    pub fn g_at(&self, u: T, du: T) -> T {
        (self.g)(u, du, self.a, &self.p, self.eps)
    }

    /// Slow-form state `(u, v, θ)` carrying position `u` and velocity `du`.
    pub fn slow_state(&self, u: T, du: T, theta: T) -> [T; 3] {
        [u, du + self.f_at(u), theta]
    }

    /// Fast-form state for the same `(u, du, θ)`.
    pub fn fast_state(&self, u: T, du: T, theta: T) -> Result<[T; 3]> {
        if self.omega == T::zero() {
            return Err(CanardError::ZeroFrequency);
        }
        let shift = self.eps * self.b / self.omega * theta.sin();
        Ok([u, du + self.f_at(u) - shift, theta])
    }

    /// Largest second difference of f and g over a box, divided by h²; finite
    /// and moderate for smooth data.
    pub fn smoothness_probe(&self, u_range: (T, T), du_range: (T, T), n: usize) -> T {
        let h = T::lit(1e-3);
        let mut worst = T::zero();
        let n = n.max(2);
        for i in 0..n {
            let s = T::lit(i as f64 / (n - 1) as f64);
            let u = u_range.0 + (u_range.1 - u_range.0) * s;
            let fu = (self.f_at(u + h) - T::lit(2.0) * self.f_at(u) + self.f_at(u - h)) / (h * h);
            worst = worst.max(fu.abs());
            for j in 0..n {
                let r = T::lit(j as f64 / (n - 1) as f64);
                let w = du_range.0 + (du_range.1 - du_range.0) * r;
                let gu = (self.g_at(u + h, w) - T::lit(2.0) * self.g_at(u, w) + self.g_at(u - h, w)) / (h * h);
                let gw = (self.g_at(u, w + h) - T::lit(2.0) * self.g_at(u, w) + self.g_at(u, w - h)) / (h * h);
                worst = worst.max(gu.abs()).max(gw.abs());
            }
        }
        worst
    }
}

/// `u' = v − f`, `v' = ε̃(−g(u, u') + b̃ cos θ)`, `θ' = ω`.
pub fn lienard_slow_form<T: Scalar>(l: &LienardDef<T>) -> impl Fn(T, &[T], &mut [T]) + Send + Sync + '_ {
    move |_t, s, ds| {
        let du = s[1] - l.f_at(s[0]);
        ds[0] = du;
        ds[1] = l.eps * (-l.g_at(s[0], du) + l.b * s[2].cos());
        ds[2] = l.omega;
    }
}

/// `u' = v − f + (ε̃ b̃/ω) sin θ`, `v' = −ε̃ g(u, u')`, `θ' = ω`.
pub fn lienard_fast_form<T: Scalar>(l: &LienardDef<T>) -> Result<impl Fn(T, &[T], &mut [T]) + Send + Sync + '_> {
    if l.omega == T::zero() {
        return Err(CanardError::ZeroFrequency);
    }
    let k = l.eps * l.b / l.omega;
    Ok(move |_t: T, s: &[T], ds: &mut [T]| {
        let du = s[1] - l.f_at(s[0]) + k * s[2].sin();
        ds[0] = du;
        ds[1] = -l.eps * l.g_at(s[0], du);
        ds[2] = l.omega;
    })
}

/// `x'' + (x² − 1)x' + ε(x − a) = ε b cos ωτ`
pub fn vdp_lienard<T: Scalar>(a: T, b: T, omega: T, eps: T) -> LienardDef<T> {
    let three = T::lit(3.0);
    LienardDef::new(
        move |u: T, _p: &[T], _e: T| u * u * u / three - u,
        |u: T, _du: T, a: T, _p: &[T], _e: T| u - a,
        a,
        Vec::new(),
        b,
        omega,
        eps,
    )
}

/// `x'' − (1 − x²)x' + ε(x + a − c(x − x³/3 + I − x')) = −ε b cos ωτ`, with `v = −y`.
pub fn fhn_lienard<T: Scalar>(i_app: T, c: T, a: T, b: T, omega: T, eps: T) -> LienardDef<T> {
    let three = T::lit(3.0);
    LienardDef::new(
        move |u: T, p: &[T], _e: T| u * u * u / three - u - p[0],
        move |u: T, du: T, a: T, p: &[T], _e: T| u + a - p[1] * (u - u * u * u / three + p[0] - du),
        a,
        vec![i_app, c],
        -b,
        omega,
        eps,
    )
}
