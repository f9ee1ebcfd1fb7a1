//! Shooting detector for maximal canards.
//!
//! Trajectories are launched from the attracting branch of the critical
//! manifold (forward in time) and from the repelling branch (backward in
//! time) for a ring of forcing phases, and their first crossings of the
//! section `x = x₀` are collected into two curves `y(θ)`. Where the curves
//! intersect, the extended attracting and repelling slow manifolds meet. A
//! fold of canards is the parameter value at which the two curves become
//! tangent.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientSet;
use crate::envelope::envelope_unified;
use crate::error::{CanardError, Result};
use crate::integrator::{integrate, Direction, Event, IvpSpec, Termination};
use crate::locator::CanardPoint;
use crate::reduced::slow_graph;
use crate::scalar::{wrap_angle, Scalar};
use crate::system::{FastPartial, SlowFastSystem};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig<T> {
    /// Anchor phases per manifold.
    pub phases: usize,
    /// Distance in x from the fold to the anchors.
    pub anchor_distance: T,
    /// Half-width in x of the working box around the fold.
    pub box_half_width: T,
    /// Margin added to the critical manifold's y range.
    pub y_margin: T,
    pub rel_tol: T,
    pub abs_tol: T,
    /// Uniform θ grid on which the two curves are compared.
    pub grid: usize,
    /// Maximum bisection depth in the anchor phase when a gap between
    /// neighbouring crossings is too large.
    pub refine_depth: usize,
    /// Maximum number of extra shots per manifold spent on refinement.
    pub refine_budget: usize,
    /// Largest fraction of invalid samples `splitting_profile` accepts.
    pub max_invalid_fraction: f64,
    pub max_iterations: usize,
    /// Neighbouring crossings further apart than this in θ are refined or split.
    pub gap_theta: T,
    /// Same in y, as a multiple of ε.
    pub gap_y_over_eps: T,
}

impl<T: Scalar> Default for DetectorConfig<T> {
    fn default() -> Self {
        DetectorConfig {
            phases: 128,
            anchor_distance: T::lit(0.5),
            box_half_width: T::lit(2.0),
            y_margin: T::one(),
            rel_tol: T::lit(1e-10),
            abs_tol: T::lit(1e-12),
            grid: 2048,
            refine_depth: 6,
            refine_budget: 128,
            max_invalid_fraction: 0.5,
            max_iterations: 40,
            gap_theta: T::two_pi() / T::lit(64.0),
            gap_y_over_eps: T::lit(0.05),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Upper,
    Lower,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Section<T> {
    /// The section is the line `x = x0`.
    pub x0: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileSample<T> {
    pub theta: T,
    /// Midpoint of the attained range of `y_att − y_rep` at this phase.
    pub delta: T,
    /// Width of that range; zero where both curves are single-valued.
    pub spread: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplittingProfile<T> {
    pub section: Section<T>,
    pub samples: Vec<ProfileSample<T>>,
    pub a: T,
    pub b: T,
    pub omega: T,
    pub eps: T,
    pub zero_crossings: Vec<T>,
    /// `min_θ (lowest attracting − highest repelling)`.
    pub delta_min: Option<T>,
    /// `max_θ (highest attracting − lowest repelling)`.
    pub delta_max: Option<T>,
    /// Fraction of the θ circle where both curves are defined.
    pub coverage: f64,
    pub invalid_attracting: usize,
    pub invalid_repelling: usize,
    pub shots: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldResult<T> {
    pub a: T,
    /// Value of the tangency function at `a`.
    pub residual: T,
    pub iterations: usize,
    pub bracket: (T, T),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint<T> {
    pub omega: T,
    pub a_lower_num: Option<T>,
    pub a_upper_num: Option<T>,
    pub a_lower_theory: T,
    pub a_upper_theory: T,
    pub lower_failure: Option<String>,
    pub upper_failure: Option<String>,
}

impl<T> BoundaryPoint<T> {
    pub fn gap_flags(&self) -> &'static str {
        match (self.a_lower_num.is_some(), self.a_upper_num.is_some()) {
            (true, true) => "ok",
            (false, true) => "lower",
            (true, false) => "upper",
            (false, false) => "both",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryMetadata<T> {
    pub eps: T,
    pub b: T,
    pub system: String,
    pub rel_tol: T,
    pub abs_tol: T,
    pub phases: usize,
    pub anchor_distance: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCurve<T> {
    pub points: Vec<BoundaryPoint<T>>,
    pub metadata: BoundaryMetadata<T>,
}

impl<T> BoundaryCurve<T> {
    /// Number of failed branch solves.
    pub fn gaps(&self) -> usize {
        self.points
            .iter()
            .map(|p| usize::from(p.a_lower_num.is_none()) + usize::from(p.a_upper_num.is_none()))
            .sum()
    }
}

/// Everything a single shot needs.
struct Shooter<'a, T: Scalar> {
    sys: &'a SlowFastSystem<T>,
    p: &'a [T],
    a: T,
    b: T,
    omega: T,
    eps: T,
    x0: T,
    att: (T, T),
    rep: (T, T),
    x_box: (T, T),
    y_box: (T, T),
    t_max: T,
    rel_tol: T,
    abs_tol: T,
}

#[derive(Clone, Copy, Debug)]
struct Sample<T> {
    phi: T,
    /// Unwrapped crossing phase and crossing height.
    hit: Option<(T, T)>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Family {
    Attracting,
    Repelling,
}

impl<'a, T: Scalar> Shooter<'a, T> {
    #[allow(clippy::too_many_arguments)]
    fn new(
        sys: &'a SlowFastSystem<T>,
        c: &CoefficientSet<T>,
        cp: &'a CanardPoint<T>,
        eps: T,
        b: T,
        omega: T,
        a: T,
        cfg: &DetectorConfig<T>,
    ) -> Result<Self> {
        let p = cp.p.as_slice();
        let d = cfg.anchor_distance;
        // Attracting side: F_x ≈ 2c₁(x − x₀) < 0.
        let mut side = if c.c1 < T::zero() { T::one() } else { -T::one() };
        let probe = |s: T| -> Result<(T, T, T)> {
            let x = cp.x0 + s * d;
            let y = slow_graph(sys, p, x, cp.y0)?;
            Ok((x, y, sys.fast_d(FastPartial::X, x, y, p, T::zero())))
        };
        let (mut xa, mut ya, fxa) = probe(side)?;
        if fxa >= T::zero() {
            side = -side;
            let q = probe(side)?;
            xa = q.0;
            ya = q.1;
        }
        let (xr, yr, fxr) = probe(-side)?;
        if !(fxr > T::zero()) {
            return Err(CanardError::Validation("no repelling branch at the anchor distance".into()));
        }
        let (xl, xh) = (cp.x0 - cfg.box_half_width, cp.x0 + cfg.box_half_width);
        let mut ylo = cp.y0.min(ya).min(yr);
        let mut yhi = cp.y0.max(ya).max(yr);
        let mut guess = cp.y0;
        for k in 0..=40 {
            let x = xl + (xh - xl) * T::lit(k as f64 / 40.0);
            if let Ok(y) = slow_graph(sys, p, x, guess) {
                ylo = ylo.min(y);
                yhi = yhi.max(y);
                guess = y;
            }
        }
        let slow_time = T::lit(5.0) / eps;
        let period = if omega > T::zero() { (T::two_pi() / omega).min(T::lit(10.0) / eps) } else { T::zero() };
        Ok(Shooter {
            sys,
            p,
            a,
            b,
            omega,
            eps,
            x0: cp.x0,
            att: (xa, ya),
            rep: (xr, yr),
            x_box: (xl, xh),
            y_box: (ylo - cfg.y_margin, yhi + cfg.y_margin),
            t_max: slow_time + T::lit(2.0) * period,
            rel_tol: cfg.rel_tol,
            abs_tol: cfg.abs_tol,
        })
    }

    fn shoot(&self, family: Family, phi: T) -> Sample<T> {
        let (start, t_end) = match family {
            Family::Attracting => (self.att, self.t_max),
            Family::Repelling => (self.rep, -self.t_max),
        };
        let (sys, p, a, b, omega, eps) = (self.sys, self.p, self.a, self.b, self.omega, self.eps);
        let rhs = move |t: T, s: &[T], ds: &mut [T]| {
            ds[0] = sys.fast(s[0], s[1], p, eps);
            ds[1] = eps * (sys.slow(s[0], s[1], a, p, eps) + b * (phi + omega * t).cos());
        };
        let x0 = self.x0;
        let section = move |_t: T, s: &[T]| s[0] - x0;
        let (xl, xh, yl, yh) = (self.x_box.0, self.x_box.1, self.y_box.0, self.y_box.1);
        let left = move |_t: T, s: &[T]| s[0] - xl;
        let right = move |_t: T, s: &[T]| s[0] - xh;
        let bottom = move |_t: T, s: &[T]| s[1] - yl;
        let top = move |_t: T, s: &[T]| s[1] - yh;
        let spec = IvpSpec::new(&rhs, T::zero(), t_end, vec![start.0, start.1])
            .tolerances(self.rel_tol, self.abs_tol)
            .max_step(self.t_max / T::lit(100.0))
            .event(Event::new(&section, Direction::Either, true))
            .event(Event::new(&left, Direction::Either, true))
            .event(Event::new(&right, Direction::Either, true))
            .event(Event::new(&bottom, Direction::Either, true))
            .event(Event::new(&top, Direction::Either, true))
            .lean();
        let hit = match integrate(&spec) {
            Ok(tr) if tr.termination == Termination::Event(0) => {
                let e = tr.events.iter().find(|e| e.index == 0).expect("section hit recorded");
                Some((phi + omega * e.t, e.state[1]))
            }
            _ => None,
        };
        Sample { phi, hit }
    }
}

fn wrap_pi<T: Scalar>(d: T) -> T {
    let w = wrap_angle(d + T::PI()) - T::PI();
    if w <= -T::PI() {
        w + T::two_pi()
    } else {
        w
    }
}

/// Monotone piecewise-cubic Hermite interpolant with increasing abscissae.
#[derive(Clone, Debug)]
struct Pchip<T> {
    x: Vec<T>,
    y: Vec<T>,
    d: Vec<T>,
}

impl<T: Scalar> Pchip<T> {
    fn new(x: Vec<T>, y: Vec<T>) -> Self {
        let n = x.len();
        let mut d = vec![T::zero(); n];
        if n >= 2 {
            let h: Vec<T> = (0..n - 1).map(|k| x[k + 1] - x[k]).collect();
            let del: Vec<T> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
            if n == 2 {
                d[0] = del[0];
                d[1] = del[0];
            } else {
                let two = T::lit(2.0);
                for k in 1..n - 1 {
                    if del[k - 1] * del[k] > T::zero() {
                        let w1 = two * h[k] + h[k - 1];
                        let w2 = h[k] + two * h[k - 1];
                        d[k] = (w1 + w2) / (w1 / del[k - 1] + w2 / del[k]);
                    }
                }
                d[0] = edge_slope(h[0], h[1], del[0], del[1]);
                d[n - 1] = edge_slope(h[n - 2], h[n - 3], del[n - 2], del[n - 3]);
            }
        }
        Pchip { x, y, d }
    }

    fn lo(&self) -> T {
        self.x[0]
    }

    fn hi(&self) -> T {
        self.x[self.x.len() - 1]
    }

    fn eval(&self, t: T) -> T {
        let n = self.x.len();
        if n == 1 {
            return self.y[0];
        }
        let k = self.x.partition_point(|&v| v <= t).clamp(1, n - 1) - 1;
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let (one, two, three) = (T::one(), T::lit(2.0), T::lit(3.0));
        let h00 = (one + two * s) * (one - s) * (one - s);
        let h10 = s * (one - s) * (one - s);
        let h01 = s * s * (three - two * s);
        let h11 = s * s * (s - one);
        h00 * self.y[k] + h10 * h * self.d[k] + h01 * self.y[k + 1] + h11 * h * self.d[k + 1]
    }
}

fn edge_slope<T: Scalar>(h0: T, h1: T, m0: T, m1: T) -> T {
    let d = ((T::lit(2.0) * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if d.signum() != m0.signum() || m0 == T::zero() {
        T::zero()
    } else if m0.signum() != m1.signum() && d.abs() > T::lit(3.0) * m0.abs() {
        T::lit(3.0) * m0
    } else {
        d
    }
}

/// One θ-monotone piece of a section curve, seen through a 2π shift.
struct Sheet<'a, T> {
    run: &'a Pchip<T>,
    shift: T,
    lo: T,
    hi: T,
}

impl<'a, T: Scalar> Sheet<'a, T> {
    fn covers(&self, th: T) -> bool {
        th >= self.lo && th <= self.hi
    }

    fn eval(&self, th: T) -> T {
        self.run.eval(th + self.shift)
    }
}

fn sheets<T: Scalar>(runs: &[Pchip<T>]) -> Vec<Sheet<'_, T>> {
    let tau = T::two_pi();
    let mut out = Vec::new();
    for run in runs {
        let m_lo = (run.lo() / tau).floor().to_i64().unwrap_or(0);
        let m_hi = (run.hi() / tau).floor().to_i64().unwrap_or(0);
        for m in m_lo..=m_hi {
            let shift = tau * T::lit(m as f64);
            let lo = (run.lo() - shift).max(T::zero());
            let hi = (run.hi() - shift).min(tau);
            if lo <= hi {
                out.push(Sheet { run, shift, lo, hi });
            }
        }
    }
    out
}

/// Normalised distance between neighbouring crossings.
struct GapMetric<T> {
    theta_scale: T,
    y_scale: T,
}

impl<T: Scalar> GapMetric<T> {
    fn dist(&self, a: (T, T), b: (T, T)) -> T {
        (wrap_pi(b.0 - a.0).abs() / self.theta_scale).max((b.1 - a.1).abs() / self.y_scale)
    }
}

struct FamilyCurve<T> {
    runs: Vec<Pchip<T>>,
    invalid: usize,
    shots: usize,
}

fn build_family<T: Scalar>(sh: &Shooter<'_, T>, family: Family, cfg: &DetectorConfig<T>, metric: &GapMetric<T>) -> FamilyCurve<T> {
    let n = cfg.phases.max(4);
    let tau = T::two_pi();
    let base: Vec<Sample<T>> = (0..n)
        .into_par_iter()
        .map(|k| sh.shoot(family, tau * T::lit(k as f64 / n as f64)))
        .collect();
    let invalid = base.iter().filter(|s| s.hit.is_none()).count();
    let mut shots = n;
    let mut budget = cfg.refine_budget;

    let mut seq: Vec<Sample<T>> = Vec::with_capacity(n * 2);
    for k in 0..n {
        let a = base[k];
        let mut b = base[(k + 1) % n];
        if k + 1 == n {
            b.phi = b.phi + tau;
        }
        seq.push(a);
        refine(sh, family, cfg, metric, a, b, 0, &mut budget, &mut shots, &mut seq);
    }
    // seq[i] joins seq[i + 1] (cyclically) when linked[i].
    let m = seq.len();
    let linked: Vec<bool> = (0..m).map(|i| link_ok(metric, &seq[i], &seq[(i + 1) % m])).collect();
    let mut runs = Vec::new();
    let (start, closed) = match (0..m).find(|&i| !linked[i]) {
        Some(i) => ((i + 1) % m, false),
        None => (0, true),
    };
    let mut piece: Vec<(T, T)> = Vec::new();
    let steps = if closed { m + 1 } else { m };
    for step in 0..steps {
        let idx = (start + step) % m;
        if let Some(h) = seq[idx].hit {
            match piece.last() {
                None => piece.push(h),
                Some(&last) => piece.push((last.0 + wrap_pi(h.0 - last.0), h.1)),
            }
        }
        if !linked[idx] {
            flush_piece(&mut piece, &mut runs);
        }
    }
    flush_piece(&mut piece, &mut runs);
    FamilyCurve { runs, invalid, shots }
}

fn link_ok<T: Scalar>(metric: &GapMetric<T>, a: &Sample<T>, b: &Sample<T>) -> bool {
    match (a.hit, b.hit) {
        (Some(p), Some(q)) => metric.dist(p, q) <= T::one(),
        _ => false,
    }
}

/// Inserts bisection samples between `a` and `b` while their crossings are
/// too far apart.
#[allow(clippy::too_many_arguments)]
fn refine<T: Scalar>(
    sh: &Shooter<'_, T>,
    family: Family,
    cfg: &DetectorConfig<T>,
    metric: &GapMetric<T>,
    a: Sample<T>,
    b: Sample<T>,
    depth: usize,
    budget: &mut usize,
    shots: &mut usize,
    out: &mut Vec<Sample<T>>,
) {
    let (Some(p), Some(q)) = (a.hit, b.hit) else { return };
    if metric.dist(p, q) <= T::one() || depth >= cfg.refine_depth || *budget == 0 {
        return;
    }
    *budget -= 1;
    *shots += 1;
    let mid = sh.shoot(family, (a.phi + b.phi) / T::lit(2.0));
    refine(sh, family, cfg, metric, a, mid, depth + 1, budget, shots, out);
    out.push(mid);
    refine(sh, family, cfg, metric, mid, b, depth + 1, budget, shots, out);
}

fn flush_piece<T: Scalar>(piece: &mut Vec<(T, T)>, runs: &mut Vec<Pchip<T>>) {
    if piece.is_empty() {
        return;
    }
    let pts = std::mem::take(piece);
    let mut run: Vec<(T, T)> = vec![pts[0]];
    let mut dir = 0i8;
    for w in pts.windows(2) {
        let d = w[1].0 - w[0].0;
        let s = if d > T::zero() { 1 } else if d < T::zero() { -1 } else { 0 };
        if s == 0 {
            continue;
        }
        if dir != 0 && s != dir {
            push_run(&run, runs);
            run = vec![w[0]];
        }
        dir = s;
        run.push(w[1]);
    }
    push_run(&run, runs);
}

fn push_run<T: Scalar>(run: &[(T, T)], runs: &mut Vec<Pchip<T>>) {
    let mut pts = run.to_vec();
    pts.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap_or(std::cmp::Ordering::Equal));
    pts.dedup_by(|p, q| p.0 == q.0);
    if pts.is_empty() {
        return;
    }
    let (x, y) = pts.into_iter().unzip();
    runs.push(Pchip::new(x, y));
}

struct Comparison<T> {
    delta_min: Option<T>,
    delta_max: Option<T>,
    samples: Vec<ProfileSample<T>>,
    crossings: Vec<T>,
    coverage: f64,
}

fn envelope_on_grid<T: Scalar>(sheets: &[Sheet<'_, T>], grid: usize) -> (Vec<T>, Vec<T>) {
    let dth = T::two_pi() / T::lit(grid as f64);
    let mut upper = vec![T::neg_infinity(); grid];
    let mut lower = vec![T::infinity(); grid];
    for sh in sheets {
        let j0 = (sh.lo / dth).ceil().to_usize().unwrap_or(0);
        let j1 = (sh.hi / dth).floor().to_usize().unwrap_or(0).min(grid - 1);
        for j in j0..=j1 {
            let th = dth * T::lit(j as f64);
            if !sh.covers(th) {
                continue;
            }
            let y = sh.eval(th);
            upper[j] = upper[j].max(y);
            lower[j] = lower[j].min(y);
        }
    }
    (upper, lower)
}

fn compare<T: Scalar>(att: &FamilyCurve<T>, rep: &FamilyCurve<T>, grid: usize, crossings: bool) -> Comparison<T> {
    let grid = grid.max(64);
    let sa = sheets(&att.runs);
    let sr = sheets(&rep.runs);
    let (ua, la) = envelope_on_grid(&sa, grid);
    let (ur, lr) = envelope_on_grid(&sr, grid);
    let dth = T::two_pi() / T::lit(grid as f64);
    let mut samples = Vec::new();
    let mut dmin: Option<T> = None;
    let mut dmax: Option<T> = None;
    for j in 0..grid {
        if !(ua[j].is_finite() && ur[j].is_finite()) {
            continue;
        }
        let lo = la[j] - ur[j];
        let hi = ua[j] - lr[j];
        dmin = Some(dmin.map_or(lo, |v| v.min(lo)));
        dmax = Some(dmax.map_or(hi, |v| v.max(hi)));
        samples.push(ProfileSample { theta: dth * T::lit(j as f64), delta: (lo + hi) / T::lit(2.0), spread: hi - lo });
    }
    let coverage = samples.len() as f64 / grid as f64;
    let zeros = if crossings { intersections(&sa, &sr, dth) } else { Vec::new() };
    Comparison { delta_min: dmin, delta_max: dmax, samples, crossings: zeros, coverage }
}

fn intersections<T: Scalar>(sa: &[Sheet<'_, T>], sr: &[Sheet<'_, T>], dth: T) -> Vec<T> {
    let tol = T::tol(1e-10, 64.0);
    let mut roots = Vec::new();
    for a in sa {
        for r in sr {
            let lo = a.lo.max(r.lo);
            let hi = a.hi.min(r.hi);
            if lo > hi {
                continue;
            }
            let d = |th: T| a.eval(th) - r.eval(th);
            let mut pts = vec![lo];
            let j0 = (lo / dth).floor().to_i64().unwrap_or(0) + 1;
            let mut j = j0;
            loop {
                let th = dth * T::lit(j as f64);
                if th >= hi {
                    break;
                }
                pts.push(th);
                j += 1;
            }
            if hi > lo {
                pts.push(hi);
            }
            let vals: Vec<T> = pts.iter().map(|&t| d(t)).collect();
            for k in 0..pts.len().saturating_sub(1) {
                let (v0, v1) = (vals[k], vals[k + 1]);
                if v0 == T::zero() {
                    roots.push(pts[k]);
                } else if v0 * v1 < T::zero() {
                    let (mut l, mut h, mut vl) = (pts[k], pts[k + 1], v0);
                    while h - l > tol {
                        let m = (l + h) / T::lit(2.0);
                        if m == l || m == h {
                            break;
                        }
                        let vm = d(m);
                        if (vm < T::zero()) == (vl < T::zero()) {
                            l = m;
                            vl = vm;
                        } else {
                            h = m;
                        }
                    }
                    roots.push((l + h) / T::lit(2.0));
                }
            }
            if let (Some(&t), Some(&v)) = (pts.last(), vals.last()) {
                if v == T::zero() && pts.len() > 1 {
                    roots.push(t);
                }
            }
        }
    }
    let mut wrapped: Vec<T> = roots.into_iter().map(wrap_angle).collect();
    wrapped.sort_by(|p, q| p.partial_cmp(q).unwrap_or(std::cmp::Ordering::Equal));
    let sep = T::lit(1e-8);
    let mut out: Vec<T> = Vec::new();
    for r in wrapped {
        if out.last().is_some_and(|&q| r - q <= sep) {
            continue;
        }
        out.push(r);
    }
    if out.len() > 1 && out[0] + T::two_pi() - out[out.len() - 1] <= sep {
        out.pop();
    }
    out
}

struct Measurement<T> {
    cmp: Comparison<T>,
    invalid_att: usize,
    invalid_rep: usize,
    shots: usize,
}

#[allow(clippy::too_many_arguments)]
fn measure<T: Scalar>(
    sys: &SlowFastSystem<T>,
    c: &CoefficientSet<T>,
    cp: &CanardPoint<T>,
    eps: T,
    b: T,
    omega: T,
    a: T,
    cfg: &DetectorConfig<T>,
    crossings: bool,
) -> Result<Measurement<T>> {
    let sh = Shooter::new(sys, c, cp, eps, b, omega, a, cfg)?;
    let metric = GapMetric { theta_scale: cfg.gap_theta, y_scale: cfg.gap_y_over_eps * eps };
    let att = build_family(&sh, Family::Attracting, cfg, &metric);
    let rep = build_family(&sh, Family::Repelling, cfg, &metric);
    let cmp = compare(&att, &rep, cfg.grid, crossings);
    Ok(Measurement { cmp, invalid_att: att.invalid, invalid_rep: rep.invalid, shots: att.shots + rep.shots })
}

fn validate_inputs<T: Scalar>(eps: T, b: T, omega: T, a: T, cfg: &DetectorConfig<T>) -> Result<()> {
    if !(eps > T::zero() && eps < T::one()) {
        return Err(CanardError::Validation("eps must lie in (0, 1)".into()));
    }
    if !(b >= T::zero()) || !b.is_finite() || !(omega >= T::zero()) || !omega.is_finite() || !a.is_finite() {
        return Err(CanardError::Validation("need finite b >= 0, omega >= 0 and a".into()));
    }
    if cfg.phases < 64 {
        return Err(CanardError::Validation("at least 64 anchor phases are required".into()));
    }
    if !(cfg.anchor_distance > T::zero()) || !(cfg.rel_tol > T::zero()) || !(cfg.abs_tol > T::zero()) {
        return Err(CanardError::Validation("anchor distance and tolerances must be positive".into()));
    }
    Ok(())
}

/// Splitting distance between the attracting and repelling section curves.
#[allow(clippy::too_many_arguments)]
pub fn splitting_profile<T: Scalar>(
    sys: &SlowFastSystem<T>,
    c: &CoefficientSet<T>,
    cp: &CanardPoint<T>,
    eps: T,
    b: T,
    omega: T,
    a: T,
    cfg: &DetectorConfig<T>,
) -> Result<SplittingProfile<T>> {
    validate_inputs(eps, b, omega, a, cfg)?;
    let m = measure(sys, c, cp, eps, b, omega, a, cfg, true)?;
    let limit = (cfg.max_invalid_fraction * cfg.phases as f64).floor() as usize;
    for invalid in [m.invalid_att, m.invalid_rep] {
        if invalid > limit {
            return Err(CanardError::TooManyInvalid { invalid, total: cfg.phases });
        }
    }
    Ok(SplittingProfile {
        section: Section { x0: cp.x0 },
        samples: m.cmp.samples,
        a,
        b,
        omega,
        eps,
        zero_crossings: m.cmp.crossings,
        delta_min: m.cmp.delta_min,
        delta_max: m.cmp.delta_max,
        coverage: m.cmp.coverage,
        invalid_attracting: m.invalid_att,
        invalid_repelling: m.invalid_rep,
        shots: m.shots,
    })
}

/// Locates the fold of canards on one branch: the `a` at which the
/// attracting and repelling section curves touch without crossing.
///
/// `warm_start` replaces the analytic prediction as the initial guess.
#[allow(clippy::too_many_arguments)]
pub fn fold_of_canards<T: Scalar>(
    sys: &SlowFastSystem<T>,
    c: &CoefficientSet<T>,
    cp: &CanardPoint<T>,
    eps: T,
    b: T,
    omega: T,
    branch: Branch,
    cfg: &DetectorConfig<T>,
    warm_start: Option<T>,
) -> Result<FoldResult<T>> {
    validate_inputs(eps, b, omega, cp.a0, cfg)?;
    let env = envelope_unified(c, cp, eps, b, omega);
    let outward = match branch {
        Branch::Upper => T::one(),
        Branch::Lower => -T::one(),
    };
    let guess = warm_start.unwrap_or(match branch {
        Branch::Upper => env.a_upper,
        Branch::Lower => env.a_lower,
    });
    let floor = T::lit(4.0) * env.formula_uncertainty;
    let step = (T::lit(0.25) * env.half_width).max(floor);
    let tol_g = T::lit(1e-12).max(T::lit(1e-2) * (b / c.c4).abs() * eps);
    let tol_a = T::lit(1e-10).max(T::lit(1e-3) * env.formula_uncertainty);
    let counter = std::cell::Cell::new(0usize);
    let eval = |a: T| -> Result<(Option<T>, Option<T>)> {
        counter.set(counter.get() + 1);
        let m = measure(sys, c, cp, eps, b, omega, a, cfg, false)?;
        Ok((m.cmp.delta_min, m.cmp.delta_max))
    };
    let fail = |evals: usize, lo: T, hi: T| CanardError::FoldSearch { iterations: evals, lo: lo.as_f64(), hi: hi.as_f64() };

    // Outside the fold the curves separate; the direction of separation fixes
    // which extremum measures tangency.
    let mut a_out = guess + outward * step;
    let mut orient = None;
    let mut g_out = T::zero();
    let mut width = step;
    for _ in 0..8 {
        let (lo, hi) = eval(a_out)?;
        let above = lo.is_some_and(|v| v > T::zero());
        let below = hi.is_some_and(|v| v < T::zero());
        if above || below {
            // `sign` is +1 when, outside this branch, the attracting curve lies above.
            let sign = if above { T::one() } else { -T::one() };
            orient = Some(sign);
            g_out = tangency(lo, hi, sign).expect("defined");
            break;
        }
        width = width * T::lit(2.0);
        a_out = guess + outward * width;
    }
    let Some(sign) = orient else {
        return Err(fail(counter.get(), guess, a_out));
    };

    let mut a_in = guess - outward * step;
    let mut width = step;
    let mut g_in = None;
    while counter.get() < cfg.max_iterations {
        let (lo, hi) = eval(a_in)?;
        match tangency(lo, hi, sign) {
            Some(g) if g < T::zero() => {
                g_in = Some(g);
                break;
            }
            Some(g) if g > T::zero() => {
                // Still outside: the fold lies further in.
                a_out = a_in;
                g_out = g;
            }
            _ => {}
        }
        width = width * T::lit(2.0);
        a_in = a_out - outward * width;
    }
    let Some(mut g_in) = g_in else {
        return Err(fail(counter.get(), a_in, a_out));
    };

    // Illinois regula falsi on the bracket.
    let mut side = 0i8;
    let mut last = (a_out, g_out);
    while counter.get() < cfg.max_iterations {
        if (a_out - a_in).abs() <= tol_a {
            let a = (a_out + a_in) / T::lit(2.0);
            let r = if last.1.abs() < g_in.abs().min(g_out.abs()) { last.1 } else { g_in.abs().min(g_out.abs()) };
            return Ok(FoldResult { a, residual: r, iterations: counter.get(), bracket: order(a_in, a_out) });
        }
        let mut a_new = a_in - g_in * (a_out - a_in) / (g_out - g_in);
        let span = (a_out - a_in).abs();
        let lo_b = a_in.min(a_out) + T::lit(1e-3) * span;
        let hi_b = a_in.max(a_out) - T::lit(1e-3) * span;
        if !a_new.is_finite() || a_new < lo_b || a_new > hi_b {
            a_new = (a_in + a_out) / T::lit(2.0);
        }
        let (lo, hi) = eval(a_new)?;
        let g = match tangency(lo, hi, sign) {
            Some(g) => g,
            None => {
                let mid = (a_in + a_out) / T::lit(2.0);
                let (lo, hi) = eval(mid)?;
                a_new = mid;
                match tangency(lo, hi, sign) {
                    Some(g) => g,
                    None => return Err(fail(counter.get(), a_in, a_out)),
                }
            }
        };
        last = (a_new, g);
        if g.abs() <= tol_g {
            return Ok(FoldResult { a: a_new, residual: g, iterations: counter.get(), bracket: order(a_in, a_out) });
        }
        if g < T::zero() {
            a_in = a_new;
            g_in = g;
            if side == -1 {
                g_out = g_out / T::lit(2.0);
            }
            side = -1;
        } else {
            a_out = a_new;
            g_out = g;
            if side == 1 {
                g_in = g_in / T::lit(2.0);
            }
            side = 1;
        }
    }
    Err(fail(counter.get(), a_in, a_out))
}

fn order<T: Scalar>(a: T, b: T) -> (T, T) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Positive when the curves are separated the way they are outside the
/// branch, negative once they cross.
fn tangency<T: Scalar>(lo: Option<T>, hi: Option<T>, sign: T) -> Option<T> {
    if sign > T::zero() {
        lo
    } else {
        hi.map(|v| -v)
    }
}

/// Both folds at every frequency, warm-starting each solve from the
/// previous frequency. Failures are recorded as gaps.
pub fn trace_boundary_lenient<T: Scalar>(
    sys: &SlowFastSystem<T>,
    c: &CoefficientSet<T>,
    cp: &CanardPoint<T>,
    eps: T,
    b: T,
    omegas: &[T],
    cfg: &DetectorConfig<T>,
) -> BoundaryCurve<T> {
    let mut points = Vec::with_capacity(omegas.len());
    let mut prev: Option<(T, Option<T>, Option<T>)> = None;
    for &omega in omegas {
        let env = envelope_unified(c, cp, eps, b, omega);
        let warm = |branch: Branch| -> Option<T> {
            let (w_prev, lo, up) = prev?;
            let old = envelope_unified(c, cp, eps, b, w_prev);
            match branch {
                Branch::Upper => up.map(|v| v + env.a_upper - old.a_upper),
                Branch::Lower => lo.map(|v| v + env.a_lower - old.a_lower),
            }
        };
        let solve = |branch: Branch| fold_of_canards(sys, c, cp, eps, b, omega, branch, cfg, warm(branch));
        let up = solve(Branch::Upper);
        let lo = solve(Branch::Lower);
        let point = BoundaryPoint {
            omega,
            a_lower_num: lo.as_ref().ok().map(|r| r.a),
            a_upper_num: up.as_ref().ok().map(|r| r.a),
            a_lower_theory: env.a_lower,
            a_upper_theory: env.a_upper,
            lower_failure: lo.err().map(|e| e.to_string()),
            upper_failure: up.err().map(|e| e.to_string()),
        };
        prev = Some((omega, point.a_lower_num, point.a_upper_num));
        points.push(point);
    }
    BoundaryCurve {
        points,
        metadata: BoundaryMetadata {
            eps,
            b,
            system: sys.name().to_string(),
            rel_tol: cfg.rel_tol,
            abs_tol: cfg.abs_tol,
            phases: cfg.phases,
            anchor_distance: cfg.anchor_distance,
        },
    }
}

/// As [`trace_boundary_lenient`], failing when more than a quarter of the
/// branch solves fail.
pub fn trace_boundary<T: Scalar>(
    sys: &SlowFastSystem<T>,
    c: &CoefficientSet<T>,
    cp: &CanardPoint<T>,
    eps: T,
    b: T,
    omegas: &[T],
    cfg: &DetectorConfig<T>,
) -> Result<BoundaryCurve<T>> {
    let curve = trace_boundary_lenient(sys, c, cp, eps, b, omegas, cfg);
    let total = 2 * curve.points.len();
    let gaps = curve.gaps();
    if 4 * gaps > total {
        return Err(CanardError::TooManyGaps { gaps, total });
    }
    Ok(curve)
}
