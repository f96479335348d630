//! Standard curve families, the curve expression syntax, and validated flow
//! and node descriptions.
//!
//! Expression syntax: `tb(sigma,rho)`, `rl(R,T)`, `cr(C)`, `delta(tau)` and
//! `pl([[t,v,s],...])` where each triple is a breakpoint time, the value just
//! after it, and the slope that follows.

use crate::algebra::{self, is_subadditive, le_on};
use crate::curve::{parse_point_list, Curve, Segment};
use crate::error::CurveError;
use crate::scalar::{Ext, Scalar};

/// Default horizon for the subadditivity check on flow envelopes.
pub const DEFAULT_CHECK_HORIZON: f64 = 64.0;

fn nonneg<T: Scalar>(name: &str, x: &T) -> Result<(), CurveError> {
    if *x < T::zero() {
        return Err(CurveError::Argument(format!("{name} must be >= 0, got {x}")));
    }
    Ok(())
}

/// `t -> sigma + rho t` for `t > 0`.
pub fn token_bucket<T: Scalar>(sigma: T, rho: T) -> Result<Curve<T>, CurveError> {
    nonneg("sigma", &sigma)?;
    nonneg("rho", &rho)?;
    Curve::new(vec![Segment::new(T::zero(), sigma, rho)], None)
}

/// `t -> R max(0, t - T)`.
pub fn rate_latency<T: Scalar>(rate: T, latency: T) -> Result<Curve<T>, CurveError> {
    if rate <= T::zero() {
        return Err(CurveError::Argument(format!("rate R must be > 0, got {rate}")));
    }
    nonneg("latency T", &latency)?;
    if latency.approx_zero() {
        return Curve::new(vec![Segment::new(T::zero(), T::zero(), rate)], None);
    }
    Curve::new(
        vec![Segment::new(T::zero(), T::zero(), T::zero()), Segment::new(latency, T::zero(), rate)],
        None,
    )
}

/// `t -> C t`.
pub fn constant_rate<T: Scalar>(c: T) -> Result<Curve<T>, CurveError> {
    nonneg("rate C", &c)?;
    Curve::new(vec![Segment::new(T::zero(), T::zero(), c)], None)
}

pub fn impulse<T: Scalar>(tau: T) -> Result<Curve<T>, CurveError> {
    algebra::impulse(tau)
}

/// Builds a curve from `(t, value after t, slope)` triples. The last slope is
/// the tail slope; use [`Curve::from_points`] for an infinite tail.
pub fn from_breakpoints<T: Scalar>(points: &[(T, T, T)]) -> Result<Curve<T>, CurveError> {
    let pts: Vec<[Ext<T>; 3]> = points
        .iter()
        .map(|(t, v, s)| [Ext::Fin(t.clone()), Ext::Fin(v.clone()), Ext::Fin(s.clone())])
        .collect();
    let tail = match points.last() {
        Some((_, _, s)) => Ext::Fin(s.clone()),
        None => return Err(CurveError::Validation("no breakpoints".into())),
    };
    Curve::from_points(&pts, tail)
}

/// Parses a curve expression such as `tb(4,1)` or `pl([[0,0,1],[2,2,3]])`.
pub fn parse_curve<T: Scalar>(expr: &str) -> Result<Curve<T>, CurveError> {
    let e = expr.trim();
    let open = e.find('(').ok_or_else(|| CurveError::Parse(format!("expected `name(args)`, got `{e}`")))?;
    let name = e[..open].trim();
    let args = e[open + 1..]
        .strip_suffix(')')
        .ok_or_else(|| CurveError::Parse(format!("missing `)` in `{e}`")))?;
    if name == "pl" {
        let pts = parse_point_list::<T>(args).map_err(|m| CurveError::Parse(format!("{m} in `{e}`")))?;
        let tail = pts.last().map(|p| p[2].clone()).unwrap_or(Ext::Inf);
        return Curve::from_points(&pts, tail);
    }
    let nums: Vec<T> = args
        .split(',')
        .map(|a| T::parse_literal(a).ok_or_else(|| CurveError::Parse(format!("bad number `{}` in `{e}`", a.trim()))))
        .collect::<Result<_, _>>()?;
    let arity = |n: usize| {
        if nums.len() == n {
            Ok(())
        } else {
            Err(CurveError::Parse(format!("`{name}` takes {n} argument(s), got {} in `{e}`", nums.len())))
        }
    };
    match name {
        "tb" => arity(2).and_then(|_| token_bucket(nums[0].clone(), nums[1].clone())),
        "rl" => arity(2).and_then(|_| rate_latency(nums[0].clone(), nums[1].clone())),
        "cr" => arity(1).and_then(|_| constant_rate(nums[0].clone())),
        "delta" => arity(1).and_then(|_| impulse(nums[0].clone())),
        other => Err(CurveError::Parse(format!("unknown curve `{other}` (expected tb, rl, cr, pl or delta)"))),
    }
}

/// A flow with a subadditive arrival envelope.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowSpec<T: Scalar = f64> {
    envelope: Curve<T>,
}

impl<T: Scalar> FlowSpec<T> {
    pub fn new(envelope: Curve<T>) -> Result<Self, CurveError> {
        Self::with_check_horizon(envelope, T::from_f64(DEFAULT_CHECK_HORIZON))
    }

    /// Rejects envelopes that are not subadditive on `[0, horizon]`.
    pub fn with_check_horizon(envelope: Curve<T>, horizon: T) -> Result<Self, CurveError> {
        if !is_subadditive(&envelope, &horizon)? {
            return Err(CurveError::Validation(format!(
                "arrival envelope {envelope} is not subadditive on [0, {horizon}]"
            )));
        }
        Ok(FlowSpec { envelope })
    }

    pub fn envelope(&self) -> &Curve<T> {
        &self.envelope
    }
}

/// Lower and upper service curves of a node with link rate `C`.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeSpec<T: Scalar = f64> {
    pub min_service: Curve<T>,
    pub max_service: Curve<T>,
    pub link_rate: T,
}

impl<T: Scalar> NodeSpec<T> {
    /// Node whose maximum service is the link itself, `C t`.
    pub fn new(min_service: Curve<T>, link_rate: T) -> Result<Self, CurveError> {
        let max_service = constant_rate(link_rate.clone())?;
        Self::with_max_service(min_service, max_service, link_rate)
    }

    pub fn with_max_service(min_service: Curve<T>, max_service: Curve<T>, link_rate: T) -> Result<Self, CurveError> {
        if !le_on(&min_service, &max_service, &T::from_f64(DEFAULT_CHECK_HORIZON)) {
            return Err(CurveError::Validation(format!(
                "minimum service {min_service} exceeds maximum service {max_service}"
            )));
        }
        Ok(NodeSpec { min_service, max_service, link_rate })
    }
}
