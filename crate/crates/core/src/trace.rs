//! Sample paths: cumulative arrival and departure functions and the
//! functionals computed from them (backlog, virtual delay, the convolution
//! started at a time `t0`, envelope and adaptive-service checks).

use crate::algebra::{conv, le_on};
use crate::curve::{Curve, Segment};
use crate::error::TraceError;
use crate::scalar::{Ext, Scalar};

/// A cumulative process on `[0, horizon]`, piecewise linear and
/// left-continuous, starting at 0.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace<T: Scalar = f64> {
    curve: Curve<T>,
    horizon: T,
}

impl<T: Scalar> Trace<T> {
    pub fn new(curve: Curve<T>, horizon: T) -> Result<Self, TraceError> {
        if horizon <= T::zero() {
            return Err(TraceError::Argument(format!("trace horizon must be > 0, got {horizon}")));
        }
        if curve.infinite_from().is_some_and(|x| *x <= horizon) {
            return Err(TraceError::Argument("a trace must stay finite up to its horizon".into()));
        }
        Ok(Trace { curve, horizon })
    }

    /// Builds a trace from `(t, cumulative)` events, interpolating linearly.
    /// Two events at the same time encode a jump; the trace stays flat after
    /// the last event.
    pub fn from_events(events: &[(T, T)], horizon: T) -> Result<Self, TraceError> {
        let err = |m: String| Err(TraceError::Argument(m));
        let mut segs: Vec<Segment<T>> = Vec::new();
        let mut prev: Option<(T, T)> = None;
        for (i, (t, v)) in events.iter().enumerate() {
            if *t < T::zero() || *v < T::zero() {
                return err(format!("event {i} ({t}, {v}) is negative"));
            }
            if let Some((pt, pv)) = &prev {
                if t < pt {
                    return err(format!("event {i} at t={t} precedes the previous event at t={pt}"));
                }
                if v < pv {
                    return err(format!("cumulative value decreases at event {i} (t={t}): {pv} then {v}"));
                }
                if t > pt {
                    let slope = (v.clone() - pv.clone()) / (t.clone() - pt.clone());
                    segs.last_mut().expect("segment open").slope = slope;
                    segs.push(Segment::new(t.clone(), v.clone(), T::zero()));
                } else {
                    segs.last_mut().expect("segment open").value = v.clone();
                }
            } else {
                if !t.approx_zero() {
                    return err(format!("the first event must be at t=0, got t={t}"));
                }
                segs.push(Segment::new(T::zero(), v.clone(), T::zero()));
            }
            prev = Some((t.clone(), v.clone()));
        }
        if segs.is_empty() {
            segs.push(Segment::new(T::zero(), T::zero(), T::zero()));
        }
        let curve = Curve::new(segs, None)?;
        Trace::new(curve, horizon)
    }

    pub fn curve(&self) -> &Curve<T> {
        &self.curve
    }

    pub fn horizon(&self) -> &T {
        &self.horizon
    }

    pub fn eval(&self, t: &T) -> T {
        self.curve.eval(t).into_finite().expect("finite within the horizon")
    }

    pub fn eval_right(&self, t: &T) -> T {
        self.curve.eval_right(t).into_finite().expect("finite within the horizon")
    }

    /// Event list: one point per breakpoint, two at a jump.
    pub fn events(&self) -> Vec<(T, T)> {
        let mut out = Vec::new();
        for s in self.curve.segments() {
            if s.start > self.horizon {
                break;
            }
            let left = self.eval(&s.start);
            out.push((s.start.clone(), left.clone()));
            if !left.approx_eq(&s.value) {
                out.push((s.start.clone(), s.value.clone()));
            }
        }
        let h = self.horizon.clone();
        if out.last().map_or(true, |(t, _)| *t < h) {
            out.push((h.clone(), self.eval(&h)));
        }
        out
    }

    /// `t,cumulative` lines.
    pub fn to_dump(&self) -> String {
        self.events().iter().map(|(t, v)| format!("{t},{v}\n")).collect()
    }

    pub fn parse_dump(text: &str) -> Result<Self, TraceError> {
        let mut events = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("t,") {
                continue;
            }
            let (t, v) = line
                .split_once(',')
                .ok_or_else(|| TraceError::Argument(format!("line {}: expected `t,cumulative`", n + 1)))?;
            let p = |s: &str| {
                T::parse_literal(s).ok_or_else(|| TraceError::Argument(format!("line {}: bad number `{}`", n + 1, s.trim())))
            };
            events.push((p(t)?, p(v)?));
        }
        let horizon = events
            .last()
            .map(|(t, _)| t.clone())
            .ok_or_else(|| TraceError::Argument("empty trace dump".into()))?;
        Trace::from_events(&events, horizon)
    }
}

/// Checks `D <= A` at every breakpoint of either trace.
pub fn check_causality<T: Scalar>(a: &Trace<T>, d: &Trace<T>) -> Result<(), TraceError> {
    let h = if a.horizon < d.horizon { a.horizon.clone() } else { d.horizon.clone() };
    for k in a.curve.knots().into_iter().chain(d.curve.knots()).filter(|k| *k <= h) {
        for (av, dv) in [(a.eval(&k), d.eval(&k)), (a.eval_right(&k), d.eval_right(&k))] {
            if !dv.approx_le(&av) {
                return Err(TraceError::Causality { t: k.to_f64(), arrivals: av.to_f64(), departures: dv.to_f64() });
            }
        }
    }
    Ok(())
}

/// `B(t) = A(t) - D(t)`.
pub fn backlog_of<T: Scalar>(a: &Trace<T>, d: &Trace<T>, t: &T) -> Result<T, TraceError> {
    check_causality(a, d)?;
    Ok(T::max_of(a.eval(t) - d.eval(t), T::zero()))
}

/// Virtual delay `W(t) = inf { w >= 0 : A(t - w) <= D(t) }`.
pub fn delay_of<T: Scalar>(a: &Trace<T>, d: &Trace<T>, t: &T) -> Result<T, TraceError> {
    check_causality(a, d)?;
    Ok(delay_unchecked(a, d, t))
}

pub(crate) fn delay_unchecked<T: Scalar>(a: &Trace<T>, d: &Trace<T>, t: &T) -> T {
    if *t <= T::zero() {
        return T::zero();
    }
    let served = d.eval(t);
    match a.curve.upper_inverse(&served) {
        Ext::Inf => T::zero(),
        Ext::Fin(u) => T::max_of(t.clone() - u, T::zero()),
    }
}

fn check_pair<T: Scalar>(t0: &T, t: &T) -> Result<(), TraceError> {
    if *t0 < T::zero() {
        return Err(TraceError::Argument(format!("t0 must be >= 0, got {t0}")));
    }
    if t0 > t {
        return Err(TraceError::Argument(format!("t0={t0} exceeds t={t}")));
    }
    Ok(())
}

/// Convolution started at `t0`:
/// `min { g(t - t0), B(t0) + inf_{0 <= s <= t - t0} A(t0, t - s) + g(s) }`,
/// evaluated directly over the candidate split points.
pub fn mod_conv<T: Scalar>(a: &Trace<T>, g: &Curve<T>, t0: &T, t: &T, b_t0: &T) -> Result<Ext<T>, TraceError> {
    check_pair(t0, t)?;
    let span = t.clone() - t0.clone();
    let a_t0 = a.eval(t0);
    let mut cands = vec![T::zero(), span.clone()];
    cands.extend(g.knots().into_iter().filter(|k| *k <= span));
    cands.extend(a.curve.knots().into_iter().filter(|k| k >= t0 && k <= t).map(|k| t.clone() - k));
    let mut best = Ext::Inf;
    for s in cands {
        if let Ext::Fin(gv) = g.eval(&s) {
            let v = b_t0.clone() + a.eval(&(t.clone() - s)) - a_t0.clone() + gv;
            best = best.min(Ext::Fin(v));
        }
    }
    Ok(g.eval(&span).min(best))
}

/// The same operator written with the departures instead of the backlog,
/// `min { g(t - t0), inf_s [A(t - s) + g(s)] - D(t0) }`, computed through a
/// general convolution of the increments of `A` after `t0`.
pub fn mod_conv_alt<T: Scalar>(a: &Trace<T>, g: &Curve<T>, t0: &T, t: &T, d_t0: &T) -> Result<Ext<T>, TraceError> {
    check_pair(t0, t)?;
    let span = t.clone() - t0.clone();
    let inc = increments_after(&a.curve, t0, &T::zero());
    let inner = conv(&inc, g)?.eval(&span);
    let shifted = inner.add(&Ext::Fin(a.eval(t0) - d_t0.clone()));
    Ok(g.eval(&span).min(shifted))
}

/// `x -> offset + f(t0 + x) - f(t0)` for `x > 0`.
fn increments_after<T: Scalar>(f: &Curve<T>, t0: &T, offset: &T) -> Curve<T> {
    let base = f.eval(t0).into_finite().expect("finite");
    let mut segs = vec![Segment::new(
        T::zero(),
        f.eval_right(t0).into_finite().expect("finite") - base.clone() + offset.clone(),
        f.slope_right(t0).into_finite().expect("finite"),
    )];
    for s in f.segments().iter().filter(|s| s.start > *t0) {
        segs.push(Segment::new(s.start.clone() - t0.clone(), s.value.clone() - base.clone() + offset.clone(), s.slope.clone()));
    }
    Curve::from_raw(segs, f.infinite_from().map(|x| x.clone() - t0.clone()))
}

/// `(A~, D~)` with `A~(x) = B(t0) + A(t0, t0 + x)` and `D~(x) = D(t0, t0 + x)`.
pub fn time_shift<T: Scalar>(a: &Trace<T>, d: &Trace<T>, t0: &T) -> Result<(Trace<T>, Trace<T>), TraceError> {
    if *t0 < T::zero() || *t0 > a.horizon {
        return Err(TraceError::Argument(format!("t0={t0} lies outside [0, {}]", a.horizon)));
    }
    if t0.approx_zero() {
        return Ok((a.clone(), d.clone()));
    }
    let b = T::max_of(a.eval(t0) - d.eval(t0), T::zero());
    let h = a.horizon.clone() - t0.clone();
    if h <= T::zero() {
        return Err(TraceError::Argument("t0 leaves no time before the horizon".into()));
    }
    Ok((
        Trace::new(increments_after(&a.curve, t0, &b), h.clone())?,
        Trace::new(increments_after(&d.curve, t0, &T::zero()), h)?,
    ))
}

/// True iff `A(s) - A(u) <= E(s - u)` for all `u <= s` within the horizon.
pub fn is_envelope_of<T: Scalar>(e: &Curve<T>, trace: &Trace<T>) -> Result<bool, TraceError> {
    let bound = conv(trace.curve(), e)?;
    Ok(le_on(trace.curve(), &bound, &trace.horizon))
}

/// True iff `D(t0, t) >= A *_{t0} S (t)` for every pair of grid points with
/// `t - t0 <= ell`.
pub fn check_adaptive<T: Scalar>(a: &Trace<T>, d: &Trace<T>, s: &Curve<T>, ell: &T, grid: &T) -> Result<bool, TraceError> {
    if *grid <= T::zero() {
        return Err(TraceError::Argument(format!("grid step must be > 0, got {grid}")));
    }
    check_causality(a, d)?;
    let h = a.horizon.clone();
    let n = (h.clone() / grid.clone()).ceil().to_f64() as i64;
    let pts: Vec<T> = (0..=n).map(|k| T::min_of(T::from_int(k) * grid.clone(), h.clone())).collect();
    for (i, t0) in pts.iter().enumerate() {
        let b = a.eval(t0) - d.eval(t0);
        let d0 = d.eval(t0);
        for t in pts[i..].iter().take_while(|t| (t.to_owned().clone() - t0.clone()).approx_le(ell)) {
            let need = mod_conv(a, s, t0, t, &b)?;
            if !need.approx_le(&Ext::Fin(d.eval(t) - d0.clone())) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
