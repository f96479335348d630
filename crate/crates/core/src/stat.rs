//! Statistical calculus on effective service curves: probabilistic bounds,
//! tandem concatenation in four variants, strengthening of interval-limited
//! adaptive curves, and recovery of plain effective service curves.
//!
//! Violation probabilities are clamped to 1; the unclamped value is kept in
//! `raw_epsilon` / [`Violation`] for diagnostics. Where the underlying
//! results assume a common `epsilon` per node, the sum over nodes is used
//! instead of `H * epsilon`, which coincides for equal values.

use std::fmt;

use crate::algebra::shift_right;
use crate::catalog::FlowSpec;
use crate::curve::Curve;
use crate::det::{self, concat_min};
use crate::error::CalcError;
use crate::scalar::{Ext, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Kind {
    Plain,
    TBounded,
    LAdaptive,
    StrongLAdaptive,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Plain => "plain",
            Kind::TBounded => "t-bounded",
            Kind::LAdaptive => "l-adaptive",
            Kind::StrongLAdaptive => "strong-l-adaptive",
        })
    }
}

/// A service curve that holds with probability at least `1 - epsilon`.
///
/// `horizon` is the time scale `T` for [`Kind::TBounded`] and the interval
/// length `ell` for the adaptive kinds.
#[derive(Clone, Debug, PartialEq)]
pub struct EffectiveServiceCurve<T: Scalar = f64> {
    pub curve: Curve<T>,
    pub epsilon: T,
    pub raw_epsilon: T,
    pub kind: Kind,
    pub horizon: Option<T>,
}

fn clamp1<T: Scalar>(x: T) -> T {
    T::min_of(x, T::one())
}

fn check_epsilon<T: Scalar>(eps: &T) -> Result<(), CalcError> {
    if *eps < T::zero() || *eps > T::one() {
        return Err(CalcError::Argument(format!("epsilon must lie in [0, 1], got {eps}")));
    }
    Ok(())
}

fn check_a<T: Scalar>(a: &T) -> Result<(), CalcError> {
    if *a <= T::zero() {
        return Err(CalcError::Argument(format!("parameter a must be > 0, got {a}")));
    }
    Ok(())
}

impl<T: Scalar> EffectiveServiceCurve<T> {
    pub fn new(curve: Curve<T>, epsilon: T, kind: Kind, horizon: Option<T>) -> Result<Self, CalcError> {
        check_epsilon(&epsilon)?;
        match (kind, &horizon) {
            (Kind::Plain, None) => {}
            (Kind::Plain, Some(_)) => {
                return Err(CalcError::Argument("a plain effective service curve has no horizon".into()))
            }
            (_, None) => return Err(CalcError::Argument(format!("a {kind} curve needs a horizon"))),
            // a time scale of zero arises when the envelope never exceeds the curve
            (Kind::TBounded, Some(h)) if *h < T::zero() => {
                return Err(CalcError::Argument(format!("time scale T must be >= 0, got {h}")))
            }
            (Kind::LAdaptive | Kind::StrongLAdaptive, Some(h)) if *h <= T::zero() => {
                return Err(CalcError::Argument(format!("interval length must be > 0, got {h}")))
            }
            _ => {}
        }
        Ok(EffectiveServiceCurve { curve, raw_epsilon: epsilon.clone(), epsilon, kind, horizon })
    }

    pub fn plain(curve: Curve<T>, epsilon: T) -> Result<Self, CalcError> {
        Self::new(curve, epsilon, Kind::Plain, None)
    }

    pub fn t_bounded(curve: Curve<T>, epsilon: T, t: T) -> Result<Self, CalcError> {
        Self::new(curve, epsilon, Kind::TBounded, Some(t))
    }

    pub fn l_adaptive(curve: Curve<T>, epsilon: T, ell: T) -> Result<Self, CalcError> {
        Self::new(curve, epsilon, Kind::LAdaptive, Some(ell))
    }

    pub fn strong_l_adaptive(curve: Curve<T>, epsilon: T, ell: T) -> Result<Self, CalcError> {
        Self::new(curve, epsilon, Kind::StrongLAdaptive, Some(ell))
    }

    /// Result constructor: clamps the probability and keeps the raw value.
    fn derived(curve: Curve<T>, raw: T, kind: Kind, horizon: Option<T>) -> Self {
        EffectiveServiceCurve { curve, epsilon: clamp1(raw.clone()), raw_epsilon: raw, kind, horizon }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StatBounds<T: Scalar = f64> {
    pub output_envelope: Curve<T>,
    pub backlog: Ext<T>,
    pub delay: Ext<T>,
    pub violation_probability: T,
}

/// Output, backlog and delay bounds that each hold with probability at least
/// `1 - epsilon` at any given time.
pub fn stat_bounds<T: Scalar>(flow: &FlowSpec<T>, esc: &EffectiveServiceCurve<T>) -> StatBounds<T> {
    let d = det::det_bounds(flow, &esc.curve);
    StatBounds {
        output_envelope: d.output_envelope,
        backlog: d.backlog,
        delay: d.delay,
        violation_probability: esc.epsilon.clone(),
    }
}

/// Violation probability of a concatenated curve, possibly growing with `t`.
#[derive(Clone, Debug, PartialEq)]
pub enum Violation<T> {
    Constant { raw: T },
    Affine { intercept: T, slope: T },
}

impl<T: Scalar> Violation<T> {
    pub fn raw_at(&self, t: &T) -> T {
        match self {
            Violation::Constant { raw } => raw.clone(),
            Violation::Affine { intercept, slope } => intercept.clone() + slope.clone() * t.clone(),
        }
    }

    /// Clamped to `[0, 1]`.
    pub fn at(&self, t: &T) -> T {
        clamp1(self.raw_at(t))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConcatResult<T: Scalar = f64> {
    pub network: EffectiveServiceCurve<T>,
    pub violation: Violation<T>,
    /// Range of the convolution with the arrivals, when it is limited.
    pub convolution_range: Option<T>,
}

fn common_horizon<T: Scalar>(nodes: &[EffectiveServiceCurve<T>], kind: Kind, what: &str) -> Result<T, CalcError> {
    let first = nodes.first().ok_or_else(|| CalcError::Argument(format!("{what} needs at least one node")))?;
    for (i, n) in nodes.iter().enumerate() {
        if n.kind != kind {
            return Err(CalcError::Argument(format!("{what}: node {} is {}, expected {kind}", i + 1, n.kind)));
        }
    }
    let h = first.horizon.clone().expect("validated on construction");
    if let Some((i, n)) = nodes.iter().enumerate().find(|(_, n)| !n.horizon.as_ref().is_some_and(|x| x.approx_eq(&h))) {
        return Err(CalcError::Argument(format!(
            "{what}: node {} has horizon {}, node 1 has {h}",
            i + 1,
            n.horizon.as_ref().map_or("none".to_string(), |x| x.to_string())
        )));
    }
    Ok(h)
}

fn network_curve<T: Scalar>(nodes: &[EffectiveServiceCurve<T>], shift: &T) -> Result<Curve<T>, CalcError> {
    let curves: Vec<Curve<T>> = nodes.iter().map(|n| n.curve.clone()).collect();
    Ok(shift_right(&concat_min(&curves)?, shift))
}

fn hops<T: Scalar>(nodes: &[EffectiveServiceCurve<T>]) -> T {
    T::from_int(nodes.len() as i64)
}

/// Sum of the per-node probabilities except the last, and the last one.
fn split_eps<T: Scalar>(nodes: &[EffectiveServiceCurve<T>]) -> (T, T) {
    let (last, rest) = nodes.split_last().expect("nonempty");
    let head = rest.iter().fold(T::zero(), |acc, n| acc + n.epsilon.clone());
    (head, last.epsilon.clone())
}

/// Plain effective service curves in tandem. The network curve is the
/// convolution shifted by `(H-1) a`; its violation probability at time `t` is
/// `eps (1 + (H-1) t / a)`.
pub fn concat_thm4<T: Scalar>(nodes: &[EffectiveServiceCurve<T>], a: &T, t: &T) -> Result<ConcatResult<T>, CalcError> {
    check_a(a)?;
    if nodes.is_empty() {
        return Err(CalcError::Argument("concatenation needs at least one node".into()));
    }
    if let Some(i) = nodes.iter().position(|n| n.kind != Kind::Plain) {
        return Err(CalcError::Argument(format!("node {} is {}, expected plain", i + 1, nodes[i].kind)));
    }
    let shift = (hops(nodes) - T::one()) * a.clone();
    let curve = network_curve(nodes, &shift)?;
    let (head, last) = split_eps(nodes);
    let violation = Violation::Affine { intercept: last, slope: head / a.clone() };
    let network = EffectiveServiceCurve::derived(curve, violation.raw_at(t), Kind::Plain, None);
    Ok(ConcatResult { network, violation, convolution_range: None })
}

/// T-bounded curves with a common `T` and `epsilon`: constant violation
/// probability `H eps (1 + (H-1)(T+a)/(2a))`, convolution range `H (T + a)`.
pub fn concat_thm5<T: Scalar>(nodes: &[EffectiveServiceCurve<T>], a: &T) -> Result<ConcatResult<T>, CalcError> {
    check_a(a)?;
    let tt = common_horizon(nodes, Kind::TBounded, "T-bounded concatenation")?;
    let eps = nodes[0].epsilon.clone();
    if let Some((i, n)) = nodes.iter().enumerate().find(|(_, n)| !n.epsilon.approx_eq(&eps)) {
        return Err(CalcError::Argument(format!(
            "T-bounded concatenation: node {} has epsilon {}, node 1 has {eps}",
            i + 1,
            n.epsilon
        )));
    }
    let h = hops(nodes);
    let shift = (h.clone() - T::one()) * a.clone();
    let curve = network_curve(nodes, &shift)?;
    let two = T::from_int(2);
    let raw = h.clone()
        * eps
        * (T::one() + (h.clone() - T::one()) * (tt.clone() + a.clone()) / (two * a.clone()));
    let range = h * (tt + a.clone());
    let network = EffectiveServiceCurve::derived(curve, raw.clone(), Kind::TBounded, Some(range.clone()));
    Ok(ConcatResult { network, violation: Violation::Constant { raw }, convolution_range: Some(range) })
}

/// Smallest `T >= 0` with `A*(T) <= S(T)` (as an infimum over `T > 0`), and
/// the curve relabelled as T-bounded with that time scale.
pub fn choose_t<T: Scalar>(
    flow: &FlowSpec<T>,
    esc: &EffectiveServiceCurve<T>,
) -> Result<(T, EffectiveServiceCurve<T>), CalcError> {
    let t = first_catch_up(flow.envelope(), &esc.curve).ok_or(CalcError::NoFiniteHorizon)?;
    let out = EffectiveServiceCurve {
        kind: Kind::TBounded,
        horizon: Some(t.clone()),
        ..esc.clone()
    };
    Ok((t, out))
}

/// `inf { t > 0 : a(t) <= s(t) }`.
pub(crate) fn first_catch_up<T: Scalar>(a: &Curve<T>, s: &Curve<T>) -> Option<T> {
    let mut knots: Vec<T> = a.knots().into_iter().chain(s.knots()).collect();
    knots.sort_by(|x, y| x.partial_cmp(y).expect("comparable"));
    knots.dedup_by(|x, y| x.approx_eq(y));
    for (j, left) in knots.iter().enumerate() {
        let (av, sv) = (a.eval_right(left), s.eval_right(left));
        let (av, sv, sa, ss) = match (av, sv, a.slope_right(left), s.slope_right(left)) {
            (Ext::Inf, ..) => continue,
            (Ext::Fin(_), Ext::Inf, ..) => return Some(left.clone()),
            (Ext::Fin(av), Ext::Fin(sv), Ext::Fin(sa), Ext::Fin(ss)) => (av, sv, sa, ss),
            _ => continue,
        };
        let d0 = sv - av;
        let m = ss - sa;
        if (d0.approx_zero() && m >= T::zero()) || (d0 > T::zero() && !d0.approx_zero()) {
            return Some(left.clone());
        }
        if m > T::zero() {
            let x = left.clone() + (-d0) / m;
            match knots.get(j + 1) {
                Some(r) if x > *r && !x.approx_eq(r) => {}
                _ => return Some(x),
            }
        }
        if let Some(r) = knots.get(j + 1) {
            if a.eval(r).approx_le(&s.eval(r)) {
                return Some(r.clone());
            }
        }
    }
    None
}

/// Interval-limited adaptive curves with a common `ell`: network curve
/// shifted by `(H-1) a`, violation `eps (1 + (H-1) ceil(ell / a))`.
pub fn concat_thm6<T: Scalar>(nodes: &[EffectiveServiceCurve<T>], a: &T) -> Result<ConcatResult<T>, CalcError> {
    check_a(a)?;
    let ell = common_horizon(nodes, Kind::LAdaptive, "adaptive concatenation")?;
    let shift = (hops(nodes) - T::one()) * a.clone();
    let curve = network_curve(nodes, &shift)?;
    let (head, last) = split_eps(nodes);
    let n = (ell.clone() / a.clone()).ceil();
    let raw = last + head * n;
    let network = EffectiveServiceCurve::derived(curve, raw.clone(), Kind::LAdaptive, Some(ell));
    Ok(ConcatResult { network, violation: Violation::Constant { raw }, convolution_range: None })
}

/// Strong adaptive curves with a common `ell`: plain convolution, violation
/// probabilities add up.
pub fn concat_thm7<T: Scalar>(nodes: &[EffectiveServiceCurve<T>]) -> Result<ConcatResult<T>, CalcError> {
    let ell = common_horizon(nodes, Kind::StrongLAdaptive, "strong adaptive concatenation")?;
    let curve = network_curve(nodes, &T::zero())?;
    let raw = nodes.iter().fold(T::zero(), |acc, n| acc + n.epsilon.clone());
    let network = EffectiveServiceCurve::derived(curve, raw.clone(), Kind::StrongLAdaptive, Some(ell));
    Ok(ConcatResult { network, violation: Violation::Constant { raw }, convolution_range: None })
}

/// Turns an interval-limited adaptive curve into a strong one: the curve is
/// shifted by `a` and the probability becomes `ceil(2 ell / a)^2 eps / 2`.
pub fn strengthen_lemma2<T: Scalar>(esc: &EffectiveServiceCurve<T>, a: &T) -> Result<EffectiveServiceCurve<T>, CalcError> {
    check_a(a)?;
    if esc.kind != Kind::LAdaptive {
        return Err(CalcError::Argument(format!("strengthening needs an l-adaptive curve, got {}", esc.kind)));
    }
    let ell = esc.horizon.clone().expect("validated");
    let n = (T::from_int(2) * ell.clone() / a.clone()).ceil();
    let raw = n.clone() * n * esc.epsilon.clone() / T::from_int(2);
    Ok(EffectiveServiceCurve::derived(shift_right(&esc.curve, a), raw, Kind::StrongLAdaptive, Some(ell)))
}

/// Assumption on the backlog under which an adaptive curve yields a plain
/// effective service curve.
#[derive(Clone, Debug, PartialEq)]
pub enum BacklogCondition<T: Scalar = f64> {
    /// The backlog empties somewhere in every window `[t - ell, t]`, except
    /// with probability `epsilon1`.
    EmptyBacklog { epsilon1: T, a: T },
    /// `B(t) <= S(ell) - A*(ell)` except with probability `epsilon1`.
    BoundedBacklog { epsilon1: T, flow: FlowSpec<T> },
}

/// The backlog assumption carried by a recovered curve. It cannot be checked
/// from curves alone, so `verified` stays false until a simulation checks it.
#[derive(Clone, Debug, PartialEq)]
pub enum BacklogAssumption<T> {
    EmptyWithinWindow { ell: T, epsilon1: T, verified: bool },
    BoundedBy { bound: T, epsilon1: T, verified: bool },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Recovered<T: Scalar = f64> {
    pub esc: EffectiveServiceCurve<T>,
    pub assumption: BacklogAssumption<T>,
}

fn bounded_slack<T: Scalar>(esc: &EffectiveServiceCurve<T>, flow: &FlowSpec<T>, ell: &T) -> Result<T, CalcError> {
    let (s, a) = (esc.curve.eval(ell), flow.envelope().eval(ell));
    match (s, a) {
        (_, Ext::Inf) => Err(CalcError::NegativeSlack { slack: f64::NEG_INFINITY }),
        (Ext::Inf, _) => Err(CalcError::Argument("service curve is infinite at ell".into())),
        (Ext::Fin(s), Ext::Fin(a)) => {
            let slack = s - a;
            if slack < T::zero() {
                return Err(CalcError::NegativeSlack { slack: slack.to_f64() });
            }
            Ok(slack)
        }
    }
}

fn recover<T: Scalar>(
    esc: &EffectiveServiceCurve<T>,
    cond: &BacklogCondition<T>,
    kind: Kind,
    scale_by_window: bool,
) -> Result<Recovered<T>, CalcError> {
    if esc.kind != kind {
        return Err(CalcError::Argument(format!("expected a {kind} curve, got {}", esc.kind)));
    }
    let ell = esc.horizon.clone().expect("validated");
    match cond {
        BacklogCondition::EmptyBacklog { epsilon1, a } => {
            check_epsilon(epsilon1)?;
            check_a(a)?;
            let (curve, raw) = if scale_by_window {
                (shift_right(&esc.curve, a), esc.epsilon.clone() * ell.clone() / a.clone() + epsilon1.clone())
            } else {
                (esc.curve.clone(), esc.epsilon.clone() + epsilon1.clone())
            };
            Ok(Recovered {
                esc: EffectiveServiceCurve::derived(curve, raw, Kind::Plain, None),
                assumption: BacklogAssumption::EmptyWithinWindow { ell, epsilon1: epsilon1.clone(), verified: false },
            })
        }
        BacklogCondition::BoundedBacklog { epsilon1, flow } => {
            check_epsilon(epsilon1)?;
            let bound = bounded_slack(esc, flow, &ell)?;
            let raw = esc.epsilon.clone() + epsilon1.clone();
            Ok(Recovered {
                esc: EffectiveServiceCurve::derived(esc.curve.clone(), raw, Kind::Plain, None),
                assumption: BacklogAssumption::BoundedBy { bound, epsilon1: epsilon1.clone(), verified: false },
            })
        }
    }
}

/// Plain effective service curve from an interval-limited adaptive one.
pub fn recover_lemma3<T: Scalar>(esc: &EffectiveServiceCurve<T>, cond: &BacklogCondition<T>) -> Result<Recovered<T>, CalcError> {
    recover(esc, cond, Kind::LAdaptive, true)
}

/// Plain effective service curve from a strong adaptive one; the curve is
/// kept and the probabilities add.
pub fn recover_lemma4<T: Scalar>(esc: &EffectiveServiceCurve<T>, cond: &BacklogCondition<T>) -> Result<Recovered<T>, CalcError> {
    recover(esc, cond, Kind::StrongLAdaptive, false)
}

/// Which concatenation a free parameter `a` is optimised for.
#[derive(Clone, Debug, PartialEq)]
pub enum ConcatKind<T> {
    /// Plain curves, violation evaluated at time `t`.
    Thm4 { t: T },
    TBounded,
    LAdaptive,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Objective<T: Scalar = f64> {
    MinViolation,
    /// Smallest delay bound among the grid points whose violation
    /// probability stays within `budget`.
    MinDelayBoundGiven { budget: T, flow: FlowSpec<T> },
}

/// Grid search over `a`; ties go to the larger `a`.
pub fn optimize_a<T: Scalar>(
    kind: &ConcatKind<T>,
    nodes: &[EffectiveServiceCurve<T>],
    objective: &Objective<T>,
    grid: &[T],
) -> Result<(T, ConcatResult<T>), CalcError> {
    if grid.is_empty() {
        return Err(CalcError::Argument("the grid for a is empty".into()));
    }
    let mut grid = grid.to_vec();
    grid.sort_by(|x, y| x.partial_cmp(y).expect("comparable"));
    let mut best: Option<(Ext<T>, T, ConcatResult<T>)> = None;
    for a in grid {
        let res = match kind {
            ConcatKind::Thm4 { t } => concat_thm4(nodes, &a, t)?,
            ConcatKind::TBounded => concat_thm5(nodes, &a)?,
            ConcatKind::LAdaptive => concat_thm6(nodes, &a)?,
        };
        let score = match objective {
            Objective::MinViolation => Ext::Fin(res.network.raw_epsilon.clone()),
            Objective::MinDelayBoundGiven { budget, flow } => {
                if !res.network.epsilon.approx_le(budget) {
                    continue;
                }
                det::delay_bound(flow, &res.network.curve)
            }
        };
        if best.as_ref().map_or(true, |(b, ..)| score.approx_le(b)) {
            best = Some((score, a, res));
        }
    }
    let (_, a, res) = best.ok_or_else(|| {
        CalcError::Infeasible("no value of a keeps the violation probability within the budget".into())
    })?;
    Ok((a, res))
}
