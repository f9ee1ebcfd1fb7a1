//! Adaptive composite Gauss–Legendre quadrature.

use serde::{Deserialize, Serialize};

use crate::error::{CanardError, Result};
use crate::scalar::Scalar;

const ORDER: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec<T> {
    /// Integrate over `[−t_max, t_max]`.
    pub t_max: T,
    pub abs_tol: T,
    /// Upper bound on the initial panel width.
    pub max_panel: T,
    pub max_depth: usize,
}

impl<T: Scalar> Default for QuadratureSpec<T> {
    fn default() -> Self {
        QuadratureSpec { t_max: T::lit(12.0), abs_tol: T::lit(1e-10), max_panel: T::lit(0.5), max_depth: 30 }
    }
}

/// Nodes and weights on `[−1, 1]`.
#[derive(Clone, Debug)]
pub struct GaussLegendre<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Scalar> GaussLegendre<T> {
    pub fn new(n: usize) -> Self {
        let mut nodes = vec![T::zero(); n];
        let mut weights = vec![T::zero(); n];
        let nf = n as f64;
        for i in 0..(n + 1) / 2 {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = T::lit(-x);
            nodes[n - 1 - i] = T::lit(x);
            weights[i] = T::lit(w);
            weights[n - 1 - i] = T::lit(w);
        }
        GaussLegendre { nodes, weights }
    }

    pub fn apply(&self, f: &impl Fn(T) -> T, a: T, b: T) -> T {
        let half = (b - a) / T::lit(2.0);
        let mid = (a + b) / T::lit(2.0);
        let s: T = self.nodes.iter().zip(&self.weights).map(|(x, w)| *w * f(mid + half * *x)).sum();
        s * half
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Integrates `f` over `[−t_max, t_max]`. `omega` is the largest angular
/// frequency present; panels are kept below a quarter period.
pub fn integrate_truncated<T: Scalar>(f: impl Fn(T) -> T, omega: T, spec: &QuadratureSpec<T>) -> Result<T> {
    if !(spec.t_max > T::zero()) || !(spec.abs_tol > T::zero()) || !(spec.max_panel > T::zero()) {
        return Err(CanardError::Validation("quadrature spec must be positive".into()));
    }
    let gl = GaussLegendre::new(ORDER);
    let len = spec.t_max + spec.t_max;
    let mut width = spec.max_panel;
    if omega.abs() > T::zero() {
        width = width.min(T::PI() / (T::lit(4.0) * omega.abs()));
    }
    let panels = (len / width).ceil().to_usize().unwrap_or(usize::MAX).max(1);
    if panels > 10_000_000 {
        return Err(CanardError::Quadrature(format!("frequency {omega} needs {panels} panels")));
    }
    let w = len / T::lit(panels as f64);
    let mut total = T::zero();
    for i in 0..panels {
        let a = -spec.t_max + w * T::lit(i as f64);
        let b = if i + 1 == panels { spec.t_max } else { a + w };
        let tol = spec.abs_tol * (b - a) / len;
        let whole = gl.apply(&f, a, b);
        total = total + adapt(&gl, &f, a, b, whole, tol, spec.max_depth)?;
    }
    if !total.is_finite() {
        return Err(CanardError::Quadrature("non-finite integral".into()));
    }
    let tail = f(spec.t_max).abs() + f(-spec.t_max).abs();
    if tail > spec.abs_tol {
        return Err(CanardError::Quadrature(format!("tail estimate {tail} above tolerance")));
    }
    Ok(total)
}

fn adapt<T: Scalar>(gl: &GaussLegendre<T>, f: &impl Fn(T) -> T, a: T, b: T, whole: T, tol: T, depth: usize) -> Result<T> {
    let m = (a + b) / T::lit(2.0);
    let left = gl.apply(f, a, m);
    let right = gl.apply(f, m, b);
    let refined = left + right;
    if (refined - whole).abs() <= tol {
        return Ok(refined);
    }
    if depth == 0 {
        return Err(CanardError::Quadrature(format!("no convergence on [{a}, {b}]")));
    }
    let h = tol / T::lit(2.0);
    Ok(adapt(gl, f, a, m, left, h, depth - 1)? + adapt(gl, f, m, b, right, h, depth - 1)?)
}
