//! Deterministic bounds: output envelope, backlog and delay for a flow
//! crossing one node, concatenation of tandem nodes, and the sufficient check
//! under which an interval-limited adaptive curve acts as a full one.

use crate::algebra::{conv, deconv};
use crate::catalog::FlowSpec;
use crate::curve::Curve;
use crate::error::CalcError;
use crate::scalar::{Ext, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub struct DetBounds<T: Scalar = f64> {
    pub output_envelope: Curve<T>,
    pub backlog: Ext<T>,
    pub delay: Ext<T>,
}

pub fn output_envelope<T: Scalar>(flow: &FlowSpec<T>, service: &Curve<T>) -> Curve<T> {
    deconv(flow.envelope(), service)
}

pub fn backlog_bound<T: Scalar>(flow: &FlowSpec<T>, service: &Curve<T>) -> Ext<T> {
    vertical_deviation(flow.envelope(), service)
}

pub fn delay_bound<T: Scalar>(flow: &FlowSpec<T>, service: &Curve<T>) -> Ext<T> {
    horizontal_deviation(flow.envelope(), service)
}

pub fn det_bounds<T: Scalar>(flow: &FlowSpec<T>, service: &Curve<T>) -> DetBounds<T> {
    DetBounds {
        output_envelope: output_envelope(flow, service),
        backlog: backlog_bound(flow, service),
        delay: delay_bound(flow, service),
    }
}

/// `sup_{t >= 0} f(t) - g(t)`, taken only where `g` is finite.
pub fn vertical_deviation<T: Scalar>(f: &Curve<T>, g: &Curve<T>) -> Ext<T> {
    let limit = match (f.infinite_from(), g.infinite_from()) {
        (Some(_), None) => return Ext::Inf,
        (Some(xf), Some(xg)) if xf < xg => return Ext::Inf,
        (None, None) if f.tail_slope() > g.tail_slope() => return Ext::Inf,
        (_, Some(xg)) => Some(xg.clone()),
        (None, None) => None,
    };
    let mut knots = f.knots();
    knots.extend(g.knots());
    let mut best = T::zero();
    let mut consider = |a: Ext<T>, b: Ext<T>| {
        if let (Ext::Fin(a), Ext::Fin(b)) = (a, b) {
            let d = a - b;
            if d > best {
                best = d;
            }
        }
    };
    for k in &knots {
        if limit.as_ref().map_or(true, |x| k <= x) {
            consider(f.eval(k), g.eval(k));
        }
        if limit.as_ref().map_or(true, |x| k < x) {
            consider(f.eval_right(k), g.eval_right(k));
        }
    }
    Ext::Fin(best)
}

/// Smallest `d >= 0` with `f(t - d) <= g(t)` for all `t`.
pub fn horizontal_deviation<T: Scalar>(f: &Curve<T>, g: &Curve<T>) -> Ext<T> {
    if f.infinite_from().is_none() {
        match (f.tail_slope(), g.tail_slope()) {
            (Ext::Fin(rf), Ext::Fin(rg)) if rf > rg => return Ext::Inf,
            _ => {}
        }
    }
    // shifts u at which the delay function can change shape
    let mut us = f.knots();
    for k in g.knots() {
        for y in [g.eval(&k), g.eval_right(&k)] {
            if let Ext::Fin(u) = f.lower_inverse(&y) {
                us.push(u);
            }
        }
    }
    let mut best: Ext<T> = Ext::zero();
    for u in &us {
        let mut cands = vec![g.lower_inverse(&f.eval(u))];
        let right = f.eval_right(u);
        match (&right, f.slope_right(u)) {
            (Ext::Fin(y), Ext::Fin(s)) if s > T::zero() => cands.push(g.upper_inverse(y)),
            _ => cands.push(g.lower_inverse(&right)),
        }
        for c in cands {
            let d = match c {
                Ext::Inf => Ext::Inf,
                Ext::Fin(x) => Ext::Fin(x - u.clone()),
            };
            best = best.max(d);
        }
        if best.is_inf() {
            break;
        }
    }
    best
}

fn fold_conv<T: Scalar>(curves: &[Curve<T>], what: &str) -> Result<Curve<T>, CalcError> {
    let (first, rest) = curves
        .split_first()
        .ok_or_else(|| CalcError::Argument(format!("{what} needs at least one node")))?;
    let mut acc = first.clone();
    for c in rest {
        acc = conv(&acc, c)?;
    }
    Ok(acc)
}

/// Network service curve of a tandem: the convolution of the node curves.
pub fn concat_min<T: Scalar>(services: &[Curve<T>]) -> Result<Curve<T>, CalcError> {
    fold_conv(services, "concatenation of minimum service curves")
}

/// Network maximum service curve of a tandem.
pub fn concat_max<T: Scalar>(max_services: &[Curve<T>]) -> Result<Curve<T>, CalcError> {
    fold_conv(max_services, "concatenation of maximum service curves")
}

/// True iff some `t` in `(0, ell]` has `A*(t) <= S(t)`. When it holds, a
/// service curve that is adaptive on intervals of length `ell` is a service
/// curve on all of `[0, t]`.
pub fn lemma1_check<T: Scalar>(flow: &FlowSpec<T>, s_ell: &Curve<T>, ell: &T) -> Result<bool, CalcError> {
    if *ell <= T::zero() {
        return Err(CalcError::Argument(format!("interval length must be > 0, got {ell}")));
    }
    let a = flow.envelope();
    let mut knots: Vec<T> = a.knots().into_iter().chain(s_ell.knots()).filter(|k| k < ell).collect();
    knots.push(T::zero());
    knots.sort_by(|x, y| x.partial_cmp(y).expect("comparable"));
    knots.dedup_by(|x, y| x.approx_eq(y));
    for (j, left) in knots.iter().enumerate() {
        let right = knots.get(j + 1).unwrap_or(ell);
        if a.eval(right).approx_le(&s_ell.eval(right)) {
            return Ok(true);
        }
        if let (Ext::Fin(av), sv) = (a.eval_right(left), s_ell.eval_right(left)) {
            if Ext::Fin(av) < sv {
                return Ok(true);
            }
        }
    }
    Ok(false)
}
