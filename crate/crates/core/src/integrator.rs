//! Adaptive explicit Runge–Kutta integration (Dormand–Prince 8(5,3)) with
//! 7th-order dense output and event location.

use serde::{Deserialize, Serialize};

use crate::error::{CanardError, Result};
use crate::scalar::Scalar;

#[path = "integrator_tableau.rs"]
mod tableau;

use tableau::{A, B, C, D, E3, E5, INTERPOLATOR_POWER, STAGES, STAGES_EXTENDED};

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;
const ERROR_EXPONENT: f64 = -1.0 / 8.0;
const EVENT_T_TOL: f64 = 1e-12;

/// Right-hand side `(t, y, dy/dt)`.
pub type Rhs<'a, T> = &'a (dyn Fn(T, &[T], &mut [T]) + Sync + 'a);

/// Which zero crossings of an event function count, measured along the
/// direction of integration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Rising,
    Falling,
    Either,
}

pub struct Event<'a, T> {
    pub func: &'a (dyn Fn(T, &[T]) -> T + Sync + 'a),
    pub direction: Direction,
    pub terminal: bool,
}

impl<'a, T> Event<'a, T> {
    pub fn new(func: &'a (dyn Fn(T, &[T]) -> T + Sync + 'a), direction: Direction, terminal: bool) -> Self {
        Event { func, direction, terminal }
    }
}

pub struct IvpSpec<'a, T> {
    pub rhs: Rhs<'a, T>,
    pub t0: T,
    /// May be smaller than `t0` for backward integration.
    pub t_end: T,
    pub y0: Vec<T>,
    pub rel_tol: T,
    pub abs_tol: T,
    /// Defaults to `|t_end − t0| / 100`.
    pub max_step: Option<T>,
    pub events: Vec<Event<'a, T>>,
    /// Keep every accepted step.
    pub store_steps: bool,
    /// Keep the interpolant of every accepted step (implies `store_steps`).
    pub dense_output: bool,
}

impl<'a, T: Scalar> IvpSpec<'a, T> {
    pub fn new(rhs: Rhs<'a, T>, t0: T, t_end: T, y0: Vec<T>) -> Self {
        IvpSpec {
            rhs,
            t0,
            t_end,
            y0,
            rel_tol: T::lit(1e-10),
            abs_tol: T::lit(1e-10),
            max_step: None,
            events: Vec::new(),
            store_steps: true,
            dense_output: true,
        }
    }

    pub fn tolerances(mut self, rel_tol: T, abs_tol: T) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }

    pub fn max_step(mut self, h: T) -> Self {
        self.max_step = Some(h);
        self
    }

    pub fn event(mut self, e: Event<'a, T>) -> Self {
        self.events.push(e);
        self
    }

    /// Record only the endpoint and event hits.
    pub fn lean(mut self) -> Self {
        self.store_steps = false;
        self.dense_output = false;
        self
    }
}

/// Interpolant over one accepted step.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DenseSegment<T> {
    pub t_old: T,
    pub t_new: T,
    y_old: Vec<T>,
    /// `INTERPOLATOR_POWER × n`, row-major.
    coeffs: Vec<T>,
}

impl<T: Scalar> DenseSegment<T> {
    pub fn eval_into(&self, t: T, out: &mut [T]) {
        let n = self.y_old.len();
        let x = (t - self.t_old) / (self.t_new - self.t_old);
        let one_m = T::one() - x;
        out.iter_mut().for_each(|v| *v = T::zero());
        for (i, row) in self.coeffs.chunks_exact(n).rev().enumerate() {
            let w = if i % 2 == 0 { x } else { one_m };
            for (o, f) in out.iter_mut().zip(row) {
                *o = (*o + *f) * w;
            }
        }
        for (o, y) in out.iter_mut().zip(&self.y_old) {
            *o = *o + *y;
        }
    }

    pub fn eval(&self, t: T) -> Vec<T> {
        let mut out = vec![T::zero(); self.y_old.len()];
        self.eval_into(t, &mut out);
        out
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EventHit<T> {
    pub t: T,
    pub state: Vec<T>,
    pub index: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Completed,
    /// Stopped by the terminal event with this index.
    Event(usize),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Trajectory<T> {
    pub dim: usize,
    pub t: Vec<T>,
    /// Flattened states, `dim` per accepted point.
    pub y: Vec<T>,
    pub segments: Vec<DenseSegment<T>>,
    pub events: Vec<EventHit<T>>,
    pub termination: Termination,
    pub rhs_evals: usize,
    pub accepted: usize,
    pub rejected: usize,
}

impl<T: Scalar> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn state(&self, i: usize) -> &[T] {
        &self.y[i * self.dim..(i + 1) * self.dim]
    }

    pub fn last_t(&self) -> T {
        *self.t.last().expect("non-empty trajectory")
    }

    pub fn last_state(&self) -> &[T] {
        self.state(self.len() - 1)
    }

    /// Dense-output evaluation; `None` outside the integrated range or when
    /// the interpolant was not kept.
    pub fn sample(&self, t: T) -> Option<Vec<T>> {
        let first = self.segments.first()?;
        let forward = first.t_new >= first.t_old;
        let key = |s: &DenseSegment<T>| if forward { s.t_new } else { -s.t_new };
        let tk = if forward { t } else { -t };
        let start = if forward { first.t_old } else { -first.t_old };
        if tk < start {
            return None;
        }
        let idx = self.segments.partition_point(|s| key(s) < tk);
        self.segments.get(idx).map(|s| s.eval(t))
    }
}

struct Tableau<T> {
    a: Vec<T>,
    b: [T; STAGES],
    c: [T; STAGES_EXTENDED],
    e3: [T; STAGES + 1],
    e5: [T; STAGES + 1],
    d: Vec<T>,
}

impl<T: Scalar> Tableau<T> {
    fn new() -> Self {
        Tableau {
            a: A.iter().flat_map(|r| r.iter().map(|&v| T::lit(v))).collect(),
            b: B.map(T::lit),
            c: C.map(T::lit),
            e3: E3.map(T::lit),
            e5: E5.map(T::lit),
            d: D.iter().flat_map(|r| r.iter().map(|&v| T::lit(v))).collect(),
        }
    }

    #[inline]
    fn a(&self, i: usize, j: usize) -> T {
        self.a[i * STAGES_EXTENDED + j]
    }
}

struct Workspace<T> {
    n: usize,
    k: Vec<T>,
    tmp: Vec<T>,
}

impl<T: Scalar> Workspace<T> {
    fn stage(&self, s: usize) -> &[T] {
        &self.k[s * self.n..(s + 1) * self.n]
    }
}

fn rms_norm<T: Scalar>(v: impl Iterator<Item = T>, n: usize) -> T {
    let s: T = v.map(|x| x * x).sum();
    (s / T::lit(n as f64)).sqrt()
}

fn check_finite<T: Scalar>(t: T, v: &[T]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(CanardError::NonFinite { t: t.as_f64() })
    }
}

/// Integrates an initial value problem.
pub fn integrate<T: Scalar>(spec: &IvpSpec<'_, T>) -> Result<Trajectory<T>> {
    let n = spec.y0.len();
    if n == 0 {
        return Err(CanardError::Validation("empty initial state".into()));
    }
    if !(spec.rel_tol > T::zero()) || !(spec.abs_tol > T::zero()) {
        return Err(CanardError::Validation("tolerances must be positive".into()));
    }
    if !spec.t0.is_finite() || !spec.t_end.is_finite() {
        return Err(CanardError::Validation("integration bounds must be finite".into()));
    }
    check_finite(spec.t0, &spec.y0)?;

    let tab = Tableau::<T>::new();
    let rhs = spec.rhs;
    let (rtol, atol) = (spec.rel_tol, spec.abs_tol);
    let span = (spec.t_end - spec.t0).abs();
    let dir = if spec.t_end >= spec.t0 { T::one() } else { -T::one() };
    let max_step = spec
        .max_step
        .unwrap_or_else(|| span / T::lit(100.0))
        .abs()
        .max(T::min_positive_value());
    let keep_steps = spec.store_steps || spec.dense_output;

    let mut traj = Trajectory {
        dim: n,
        t: vec![spec.t0],
        y: spec.y0.clone(),
        segments: Vec::new(),
        events: Vec::new(),
        termination: Termination::Completed,
        rhs_evals: 0,
        accepted: 0,
        rejected: 0,
    };
    if span == T::zero() {
        return Ok(traj);
    }

    let mut ws = Workspace { n, k: vec![T::zero(); STAGES_EXTENDED * n], tmp: vec![T::zero(); n] };
    let mut t = spec.t0;
    let mut y = spec.y0.clone();
    let mut f = vec![T::zero(); n];
    rhs(t, &y, &mut f);
    traj.rhs_evals += 1;
    check_finite(t, &f)?;

    let mut h_abs = initial_step(rhs, t, &y, &f, spec.t_end, max_step, dir, rtol, atol, &mut traj.rhs_evals);
    let mut g_old: Vec<T> = spec.events.iter().map(|e| (e.func)(t, &y)).collect();
    let mut y_new = vec![T::zero(); n];
    let mut f_new = vec![T::zero(); n];
    let floor = T::lit(1e-14).max(T::epsilon());

    while dir * (spec.t_end - t) > T::zero() {
        let min_step = floor.max(T::lit(10.0) * T::epsilon() * t.abs());
        h_abs = h_abs.min(max_step).max(min_step);
        let mut rejected = false;
        let (t_new, h) = loop {
            if h_abs < min_step {
                return Err(CanardError::StepUnderflow {
                    t: t.as_f64(),
                    h: h_abs.as_f64(),
                    state: y.iter().map(|v| v.as_f64()).collect(),
                });
            }
            let mut t_new = t + dir * h_abs;
            if dir * (t_new - spec.t_end) > T::zero() {
                t_new = spec.t_end;
            }
            let h = t_new - t;
            h_abs = h.abs();
            rk_step(rhs, &tab, &mut ws, t, &y, &f, h, &mut y_new, &mut f_new);
            traj.rhs_evals += STAGES;
            if !y_new.iter().chain(f_new.iter()).all(|v| v.is_finite()) {
                h_abs = h_abs * T::lit(MIN_FACTOR);
                rejected = true;
                traj.rejected += 1;
                if h_abs < min_step {
                    return Err(CanardError::NonFinite { t: t.as_f64() });
                }
                continue;
            }
            let err = error_norm(&tab, &ws, h, &y, &y_new, rtol, atol);
            if err < T::one() {
                let factor = if err == T::zero() {
                    T::lit(MAX_FACTOR)
                } else {
                    T::lit(MAX_FACTOR).min(T::lit(SAFETY) * err.powf(T::lit(ERROR_EXPONENT)))
                };
                let factor = if rejected { factor.min(T::one()) } else { factor };
                h_abs = h_abs * factor;
                break (t_new, h);
            }
            h_abs = h_abs * T::lit(MIN_FACTOR).max(T::lit(SAFETY) * err.powf(T::lit(ERROR_EXPONENT)));
            rejected = true;
            traj.rejected += 1;
        };
        traj.accepted += 1;

        let g_new: Vec<T> = spec.events.iter().map(|e| (e.func)(t_new, &y_new)).collect();
        let triggered: Vec<usize> = (0..spec.events.len())
            .filter(|&i| crosses(g_old[i], g_new[i], spec.events[i].direction))
            .collect();

        let need_dense = spec.dense_output || !triggered.is_empty();
        let seg = if need_dense {
            Some(dense_segment(rhs, &tab, &mut ws, t, &y, &f, t_new, &y_new, &f_new, h, &mut traj.rhs_evals))
        } else {
            None
        };

        let mut stop: Option<(T, usize)> = None;
        if let Some(seg) = &seg {
            let mut hits: Vec<EventHit<T>> = triggered
                .iter()
                .map(|&i| {
                    let te = locate_event(seg, spec.events[i].func, t, t_new, g_old[i]);
                    EventHit { t: te, state: seg.eval(te), index: i }
                })
                .collect();
            hits.sort_by(|p, q| (dir * p.t).partial_cmp(&(dir * q.t)).unwrap_or(std::cmp::Ordering::Equal));
            for hit in hits {
                if let Some((ts, _)) = stop {
                    if dir * (hit.t - ts) > T::zero() {
                        break;
                    }
                }
                if spec.events[hit.index].terminal && stop.is_none() {
                    stop = Some((hit.t, hit.index));
                }
                traj.events.push(hit);
            }
        }

        if let Some((ts, idx)) = stop {
            let seg = seg.expect("dense segment for event");
            let ys = seg.eval(ts);
            if keep_steps {
                traj.t.push(ts);
                traj.y.extend_from_slice(&ys);
            } else {
                traj.t = vec![ts];
                traj.y = ys;
            }
            if spec.dense_output {
                traj.segments.push(seg);
            }
            traj.termination = Termination::Event(idx);
            return Ok(traj);
        }

        if spec.dense_output {
            traj.segments.push(seg.expect("dense segment"));
        }
        t = t_new;
        std::mem::swap(&mut y, &mut y_new);
        std::mem::swap(&mut f, &mut f_new);
        g_old = g_new;
        if keep_steps {
            traj.t.push(t);
            traj.y.extend_from_slice(&y);
        }
    }
    if !keep_steps {
        traj.t = vec![t];
        traj.y = y;
    }
    Ok(traj)
}

fn crosses<T: Scalar>(g0: T, g1: T, d: Direction) -> bool {
    let up = g0 < T::zero() && g1 >= T::zero();
    let down = g0 > T::zero() && g1 <= T::zero();
    match d {
        Direction::Rising => up,
        Direction::Falling => down,
        Direction::Either => up || down,
    }
}

fn locate_event<T: Scalar>(seg: &DenseSegment<T>, g: &(dyn Fn(T, &[T]) -> T + Sync + '_), t0: T, t1: T, g0: T) -> T {
    let mut lo = t0;
    let mut hi = t1;
    let mut buf = vec![T::zero(); seg.y_old.len()];
    let lo_sign = g0 < T::zero();
    let tol = T::lit(EVENT_T_TOL).max(T::lit(4.0) * T::epsilon() * t1.abs().max(t0.abs()));
    for _ in 0..200 {
        if (hi - lo).abs() <= tol {
            break;
        }
        let mid = lo + (hi - lo) / T::lit(2.0);
        if mid == lo || mid == hi {
            break;
        }
        seg.eval_into(mid, &mut buf);
        let gm = g(mid, &buf);
        if gm == T::zero() {
            return mid;
        }
        if (gm < T::zero()) == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Pick whichever bracket end has the smaller residual.
    seg.eval_into(lo, &mut buf);
    let glo = g(lo, &buf).abs();
    seg.eval_into(hi, &mut buf);
    let ghi = g(hi, &buf).abs();
    if glo <= ghi {
        lo
    } else {
        hi
    }
}

#[allow(clippy::too_many_arguments)]
fn rk_step<T: Scalar>(
    rhs: Rhs<'_, T>,
    tab: &Tableau<T>,
    ws: &mut Workspace<T>,
    t: T,
    y: &[T],
    f: &[T],
    h: T,
    y_new: &mut [T],
    f_new: &mut [T],
) {
    let n = ws.n;
    ws.k[..n].copy_from_slice(f);
    for s in 1..STAGES {
        for i in 0..n {
            let mut acc = T::zero();
            for j in 0..s {
                acc = acc + ws.k[j * n + i] * tab.a(s, j);
            }
            ws.tmp[i] = y[i] + h * acc;
        }
        let (_, rest) = ws.k.split_at_mut(s * n);
        rhs(t + tab.c[s] * h, &ws.tmp, &mut rest[..n]);
    }
    for i in 0..n {
        let mut acc = T::zero();
        for j in 0..STAGES {
            acc = acc + ws.k[j * n + i] * tab.b[j];
        }
        y_new[i] = y[i] + h * acc;
    }
    rhs(t + h, y_new, f_new);
    ws.k[STAGES * n..(STAGES + 1) * n].copy_from_slice(f_new);
}

fn error_norm<T: Scalar>(tab: &Tableau<T>, ws: &Workspace<T>, h: T, y: &[T], y_new: &[T], rtol: T, atol: T) -> T {
    let n = ws.n;
    let mut e5 = T::zero();
    let mut e3 = T::zero();
    for i in 0..n {
        let scale = atol + y[i].abs().max(y_new[i].abs()) * rtol;
        let mut a5 = T::zero();
        let mut a3 = T::zero();
        for j in 0..=STAGES {
            let k = ws.k[j * n + i];
            a5 = a5 + k * tab.e5[j];
            a3 = a3 + k * tab.e3[j];
        }
        e5 = e5 + (a5 / scale).powi(2);
        e3 = e3 + (a3 / scale).powi(2);
    }
    if e5 == T::zero() && e3 == T::zero() {
        return T::zero();
    }
    let denom = e5 + T::lit(0.01) * e3;
    h.abs() * e5 / (denom * T::lit(n as f64)).sqrt()
}

#[allow(clippy::too_many_arguments)]
fn dense_segment<T: Scalar>(
    rhs: Rhs<'_, T>,
    tab: &Tableau<T>,
    ws: &mut Workspace<T>,
    t_old: T,
    y_old: &[T],
    f_old: &[T],
    t_new: T,
    y_new: &[T],
    f_new: &[T],
    h: T,
    evals: &mut usize,
) -> DenseSegment<T> {
    let n = ws.n;
    for s in STAGES + 1..STAGES_EXTENDED {
        for i in 0..n {
            let mut acc = T::zero();
            for j in 0..s {
                acc = acc + ws.k[j * n + i] * tab.a(s, j);
            }
            ws.tmp[i] = y_old[i] + h * acc;
        }
        let (_, rest) = ws.k.split_at_mut(s * n);
        rhs(t_old + tab.c[s] * h, &ws.tmp, &mut rest[..n]);
        *evals += 1;
    }
    let mut coeffs = vec![T::zero(); INTERPOLATOR_POWER * n];
    let two = T::lit(2.0);
    for i in 0..n {
        let dy = y_new[i] - y_old[i];
        coeffs[i] = dy;
        coeffs[n + i] = h * f_old[i] - dy;
        coeffs[2 * n + i] = two * dy - h * (f_new[i] + f_old[i]);
    }
    for r in 0..INTERPOLATOR_POWER - 3 {
        for i in 0..n {
            let mut acc = T::zero();
            for s in 0..STAGES_EXTENDED {
                acc = acc + tab.d[r * STAGES_EXTENDED + s] * ws.stage(s)[i];
            }
            coeffs[(3 + r) * n + i] = h * acc;
        }
    }
    DenseSegment { t_old, t_new, y_old: y_old.to_vec(), coeffs }
}

#[allow(clippy::too_many_arguments)]
fn initial_step<T: Scalar>(
    rhs: Rhs<'_, T>,
    t0: T,
    y0: &[T],
    f0: &[T],
    t_end: T,
    max_step: T,
    dir: T,
    rtol: T,
    atol: T,
    evals: &mut usize,
) -> T {
    let n = y0.len();
    let span = (t_end - t0).abs();
    let scale: Vec<T> = y0.iter().map(|v| atol + v.abs() * rtol).collect();
    let d0 = rms_norm(y0.iter().zip(&scale).map(|(y, s)| *y / *s), n);
    let d1 = rms_norm(f0.iter().zip(&scale).map(|(f, s)| *f / *s), n);
    let small = T::lit(1e-5);
    let h0 = if d0 < small || d1 < small { T::lit(1e-6) } else { T::lit(0.01) * d0 / d1 };
    let h0 = h0.min(span);
    let y1: Vec<T> = y0.iter().zip(f0).map(|(y, f)| *y + h0 * dir * *f).collect();
    let mut f1 = vec![T::zero(); n];
    rhs(t0 + h0 * dir, &y1, &mut f1);
    *evals += 1;
    let d2 = rms_norm(f1.iter().zip(f0).zip(&scale).map(|((a, b), s)| (*a - *b) / *s), n) / h0;
    let tiny = T::lit(1e-15);
    let h1 = if d1 <= tiny && d2 <= tiny {
        T::lit(1e-6).max(h0 * T::lit(1e-3))
    } else {
        (T::lit(0.01) / d1.max(d2)).powf(T::one() / T::lit(8.0))
    };
    let h = (T::lit(100.0) * h0).min(h1).min(span).min(max_step);
    if h.is_finite() && h > T::zero() {
        h
    } else {
        max_step.min(span)
    }
}
