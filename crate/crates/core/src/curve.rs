//! Piecewise-linear curves on `[0, inf)`.
//!
//! A [`Curve`] is nondecreasing and left-continuous, with `f(t) = 0` for
//! `t <= 0`. It is stored as a list of segments: segment `i` covers the
//! half-open interval `(start_i, start_{i+1}]` and takes the value
//! `value_i + slope_i * (t - start_i)` there, so `value_i` is the right limit
//! `f(start_i+)`. The value at a breakpoint is always the left limit, which
//! the representation enforces by construction. Optionally the curve becomes
//! `+inf` after a point `X` (`f = inf` on `(X, inf)`), which encodes the
//! impulse `delta_X` and "no finite bound" results.

use std::fmt;

use crate::error::CurveError;
use crate::scalar::{Ext, Scalar};

#[derive(Clone, Debug)]
pub struct Segment<T> {
    pub start: T,
    /// Right limit at `start`.
    pub value: T,
    pub slope: T,
}

impl<T: Scalar> Segment<T> {
    pub fn new(start: T, value: T, slope: T) -> Self {
        Segment { start, value, slope }
    }

    /// Value of the affine piece at `t` (no domain check).
    pub fn at(&self, t: &T) -> T {
        self.value.clone() + self.slope.clone() * (t.clone() - self.start.clone())
    }
}

#[derive(Clone, Debug)]
pub struct Curve<T: Scalar = f64> {
    segs: Vec<Segment<T>>,
    inf_from: Option<T>,
}

impl<T: Scalar> Curve<T> {
    /// Builds a curve, validating every invariant and merging redundant
    /// breakpoints.
    pub fn new(segs: Vec<Segment<T>>, inf_from: Option<T>) -> Result<Self, CurveError> {
        let c = Curve { segs, inf_from };
        c.validate()?;
        Ok(c.normalized())
    }

    /// Trusted constructor for algorithm outputs. Snaps float noise, then
    /// normalizes; validity is asserted in debug builds.
    pub(crate) fn from_raw(mut segs: Vec<Segment<T>>, inf_from: Option<T>) -> Self {
        for i in 0..segs.len() {
            if segs[i].slope < T::zero() {
                segs[i].slope = T::zero();
            }
            if segs[i].value < T::zero() {
                segs[i].value = T::zero();
            }
            if i + 1 < segs.len() {
                let end = segs[i].at(&segs[i + 1].start);
                if segs[i + 1].value < end {
                    segs[i + 1].value = end;
                }
            }
        }
        let c = Curve { segs, inf_from }.normalized();
        debug_assert!(c.validate().is_ok(), "{:?}: {:?}", c.validate(), c);
        c
    }

    /// The curve that is `+inf` on `(0, inf)`; equal to `impulse(0)`.
    pub fn infinite() -> Self {
        Curve { segs: Vec::new(), inf_from: Some(T::zero()) }
    }

    pub fn zero() -> Self {
        Curve { segs: vec![Segment::new(T::zero(), T::zero(), T::zero())], inf_from: None }
    }

    pub fn segments(&self) -> &[Segment<T>] {
        &self.segs
    }

    /// The point after which the curve is `+inf`, if any.
    pub fn infinite_from(&self) -> Option<&T> {
        self.inf_from.as_ref()
    }

    /// True for the all-`inf` curve.
    pub fn is_infinite(&self) -> bool {
        self.segs.is_empty()
    }

    pub fn breakpoint_count(&self) -> usize {
        self.segs.len() + usize::from(self.inf_from.is_some())
    }

    pub fn tail_slope(&self) -> Ext<T> {
        match (&self.inf_from, self.segs.last()) {
            (Some(_), _) | (None, None) => Ext::Inf,
            (None, Some(s)) => Ext::Fin(s.slope.clone()),
        }
    }

    /// Segment starts plus the start of the infinite part.
    pub fn knots(&self) -> Vec<T> {
        let mut k: Vec<T> = self.segs.iter().map(|s| s.start.clone()).collect();
        if let Some(x) = &self.inf_from {
            if k.last().map_or(true, |l| l < x) {
                k.push(x.clone());
            }
        }
        if k.is_empty() {
            k.push(T::zero());
        }
        k
    }

    /// End of segment `i` (`None` for the unbounded tail).
    pub(crate) fn seg_end(&self, i: usize) -> Option<T> {
        match self.segs.get(i + 1) {
            Some(next) => Some(next.start.clone()),
            None => self.inf_from.clone(),
        }
    }

    /// `f(t)`, left-continuous, with `f(t) = 0` for `t <= 0`.
    pub fn eval(&self, t: &T) -> Ext<T> {
        if *t <= T::zero() {
            return Ext::zero();
        }
        if let Some(x) = &self.inf_from {
            if t > x {
                return Ext::Inf;
            }
        }
        let idx = self.segs.partition_point(|s| s.start < *t);
        // idx >= 1 because segs[0].start == 0 < t
        Ext::Fin(self.segs[idx - 1].at(t))
    }

    /// Right limit `f(t+)` for `t >= 0`.
    pub fn eval_right(&self, t: &T) -> Ext<T> {
        if *t < T::zero() {
            return Ext::zero();
        }
        if let Some(x) = &self.inf_from {
            if t >= x {
                return Ext::Inf;
            }
        }
        let idx = self.segs.partition_point(|s| s.start <= *t);
        Ext::Fin(self.segs[idx - 1].at(t))
    }

    /// Slope of the curve just to the right of `t`.
    pub fn slope_right(&self, t: &T) -> Ext<T> {
        if let Some(x) = &self.inf_from {
            if t >= x {
                return Ext::Inf;
            }
        }
        if *t < T::zero() {
            return Ext::zero();
        }
        let idx = self.segs.partition_point(|s| s.start <= *t);
        Ext::Fin(self.segs[idx - 1].slope.clone())
    }

    /// `inf { x >= 0 : f(x) >= y }`; `Inf` when `f` stays below `y`.
    pub fn lower_inverse(&self, y: &Ext<T>) -> Ext<T> {
        let y = match y {
            Ext::Inf => {
                return match &self.inf_from {
                    Some(x) => Ext::Fin(x.clone()),
                    None => Ext::Inf,
                }
            }
            Ext::Fin(v) => v,
        };
        if *y <= T::zero() {
            return Ext::zero();
        }
        for (i, s) in self.segs.iter().enumerate() {
            if s.value >= *y {
                return Ext::Fin(s.start.clone());
            }
            let end = self.seg_end(i);
            if s.slope > T::zero() {
                let x = s.start.clone() + (y.clone() - s.value.clone()) / s.slope.clone();
                match &end {
                    Some(e) if x > *e => {}
                    _ => return Ext::Fin(x),
                }
            }
        }
        match &self.inf_from {
            Some(x) => Ext::Fin(x.clone()),
            None => Ext::Inf,
        }
    }

    /// `sup { x >= 0 : f(x) <= y }` for finite `y >= 0`; `Inf` when `f`
    /// never exceeds `y`.
    pub fn upper_inverse(&self, y: &T) -> Ext<T> {
        let mut last = Ext::zero();
        for (i, s) in self.segs.iter().enumerate() {
            if s.value > *y {
                // f(start) <= y because start was reached from the left
                return Ext::Fin(s.start.clone());
            }
            let end = self.seg_end(i);
            if s.slope > T::zero() {
                let x = s.start.clone() + (y.clone() - s.value.clone()) / s.slope.clone();
                match &end {
                    Some(e) if x >= *e => last = Ext::Fin(e.clone()),
                    _ => return Ext::Fin(x),
                }
            } else {
                match end {
                    Some(e) => last = Ext::Fin(e),
                    None => return Ext::Inf,
                }
            }
        }
        if self.segs.is_empty() {
            return Ext::zero();
        }
        last
    }

    pub fn validate(&self) -> Result<(), CurveError> {
        let err = |m: String| Err(CurveError::Validation(m));
        if let Some(x) = &self.inf_from {
            if *x < T::zero() {
                return err(format!("infinite part starts at negative time {x}"));
            }
        }
        if self.segs.is_empty() {
            return match &self.inf_from {
                Some(x) if x.approx_zero() => Ok(()),
                _ => err("a curve needs at least one segment unless it is +inf on (0, inf)".into()),
            };
        }
        if !self.segs[0].start.approx_zero() {
            return err(format!("first breakpoint must be at t=0, got {}", self.segs[0].start));
        }
        for (i, s) in self.segs.iter().enumerate() {
            if s.value.approx_lt(&T::zero()) {
                return err(format!("breakpoint {i} (t={}) has negative value {}", s.start, s.value));
            }
            if s.slope.approx_lt(&T::zero()) {
                return err(format!("breakpoint {i} (t={}) has negative slope {}", s.start, s.slope));
            }
            if let Some(next) = self.segs.get(i + 1) {
                if next.start <= s.start {
                    return err(format!(
                        "breakpoints {i} and {} are not strictly increasing in time ({} then {})",
                        i + 1,
                        s.start,
                        next.start
                    ));
                }
                let end = s.at(&next.start);
                if next.value.approx_lt(&end) {
                    return err(format!(
                        "curve decreases between breakpoints {i} and {}: {} at t={} then {}",
                        i + 1,
                        end,
                        next.start,
                        next.value
                    ));
                }
            }
            if let Some(x) = &self.inf_from {
                if s.start >= *x {
                    return err(format!("breakpoint {i} at t={} lies in the infinite part", s.start));
                }
            }
        }
        Ok(())
    }

    fn normalized(mut self) -> Self {
        if let Some(first) = self.segs.first_mut() {
            first.start = T::zero();
        }
        let mut out: Vec<Segment<T>> = Vec::with_capacity(self.segs.len());
        for s in self.segs.drain(..) {
            if let Some(prev) = out.last() {
                let end = prev.at(&s.start);
                if s.value.approx_eq(&end) && s.slope.approx_eq(&prev.slope) {
                    continue;
                }
            }
            out.push(s);
        }
        self.segs = out;
        self
    }

    /// Structural equality up to the scalar tolerance (exact for rationals).
    pub fn approx_eq(&self, other: &Self) -> bool {
        let inf_eq = match (&self.inf_from, &other.inf_from) {
            (None, None) => true,
            (Some(a), Some(b)) => a.approx_eq(b),
            _ => false,
        };
        inf_eq
            && self.segs.len() == other.segs.len()
            && self.segs.iter().zip(&other.segs).all(|(a, b)| {
                a.start.approx_eq(&b.start) && a.value.approx_eq(&b.value) && a.slope.approx_eq(&b.slope)
            })
    }

    /// Converts between scalar backends through `f64`-free paths where possible.
    pub fn map_scalar<U: Scalar>(&self, f: impl Fn(&T) -> U) -> Curve<U> {
        Curve::from_raw(
            self.segs.iter().map(|s| Segment::new(f(&s.start), f(&s.value), f(&s.slope))).collect(),
            self.inf_from.as_ref().map(&f),
        )
    }

    pub fn to_f64(&self) -> Curve<f64> {
        self.map_scalar(|v| v.to_f64())
    }

    /// Textual record `{breakpoints: [[t, v, slope], ...], tail_slope: s}`.
    ///
    /// `v` is the right limit at `t`. For curves that become infinite the
    /// final breakpoint is `[X, "inf", "inf"]` and `tail_slope` is `"inf"`.
    pub fn to_record(&self) -> String {
        let mut parts: Vec<String> =
            self.segs.iter().map(|s| format!("[{}, {}, {}]", s.start, s.value, s.slope)).collect();
        if let Some(x) = &self.inf_from {
            parts.push(format!("[{x}, \"inf\", \"inf\"]"));
        }
        let tail = match self.tail_slope() {
            Ext::Fin(s) => s.to_string(),
            Ext::Inf => "\"inf\"".to_string(),
        };
        format!("{{breakpoints: [{}], tail_slope: {}}}", parts.join(", "), tail)
    }

    pub fn parse_record(text: &str) -> Result<Self, CurveError> {
        let perr = |m: &str| CurveError::Parse(format!("{m} in curve record `{}`", text.trim()));
        let body = text.trim();
        let body = body
            .strip_prefix('{')
            .and_then(|b| b.strip_suffix('}'))
            .ok_or_else(|| perr("expected braces"))?;
        let bp_key = body.find("breakpoints").ok_or_else(|| perr("missing `breakpoints`"))?;
        let tail_key = body.find("tail_slope").ok_or_else(|| perr("missing `tail_slope`"))?;
        let open = body[bp_key..].find('[').map(|i| i + bp_key).ok_or_else(|| perr("missing `[`"))?;
        let mut depth = 0usize;
        let mut close = None;
        for (i, c) in body[open..].char_indices() {
            match c {
                '[' => depth += 1,
                ']' => {
                    depth -= 1;
                    if depth == 0 {
                        close = Some(open + i);
                        break;
                    }
                }
                _ => {}
            }
        }
        let close = close.ok_or_else(|| perr("unbalanced brackets"))?;
        let points = parse_point_list(&body[open..=close]).map_err(|m| perr(&m))?;
        let tail_txt = body[tail_key + "tail_slope".len()..]
            .trim_start()
            .strip_prefix(':')
            .ok_or_else(|| perr("expected `:` after tail_slope"))?;
        let tail_txt = tail_txt.trim().trim_end_matches(',').trim();
        let tail: Ext<T> = parse_ext(tail_txt).ok_or_else(|| perr("bad tail_slope"))?;
        Self::from_points(&points, tail)
    }

    /// Builds a curve from `[t, v, slope]` triples plus a tail slope; the
    /// shared backend of `from_breakpoints` and record parsing.
    pub fn from_points(points: &[[Ext<T>; 3]], tail: Ext<T>) -> Result<Self, CurveError> {
        let verr = |m: String| Err(CurveError::Validation(m));
        let mut segs = Vec::new();
        let mut inf_from = None;
        for (i, [t, v, s]) in points.iter().enumerate() {
            let t = match t {
                Ext::Fin(t) => t.clone(),
                Ext::Inf => return verr(format!("breakpoint {i} has infinite time")),
            };
            match (v, s) {
                (Ext::Fin(v), Ext::Fin(s)) => {
                    if inf_from.is_some() {
                        return verr(format!("breakpoint {i} follows the infinite part"));
                    }
                    segs.push(Segment::new(t, v.clone(), s.clone()));
                }
                _ => {
                    if i + 1 != points.len() {
                        return verr(format!("only the last breakpoint may be infinite (breakpoint {i})"));
                    }
                    inf_from = Some(t);
                }
            }
        }
        match (&tail, &inf_from) {
            (Ext::Inf, None) => {
                // the last breakpoint jumps to infinity
                let last = segs.pop().ok_or_else(|| CurveError::Validation("no breakpoints".into()))?;
                if segs.is_empty() && !last.start.approx_zero() {
                    return verr("first breakpoint must be at t=0".into());
                }
                inf_from = Some(last.start);
            }
            (Ext::Fin(ts), None) => match segs.last() {
                Some(last) if !last.slope.approx_eq(ts) => {
                    return verr(format!(
                        "tail_slope {ts} differs from the slope {} of the last breakpoint",
                        last.slope
                    ))
                }
                None => return verr("no breakpoints".into()),
                _ => {}
            },
            (Ext::Fin(_), Some(_)) => {
                return verr("a finite tail_slope cannot follow an infinite breakpoint".into())
            }
            (Ext::Inf, Some(_)) => {}
        }
        Curve::new(segs, inf_from)
    }
}

impl<T: Scalar> PartialEq for Curve<T> {
    fn eq(&self, other: &Self) -> bool {
        self.approx_eq(other)
    }
}

impl<T: Scalar> fmt::Display for Curve<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_record())
    }
}

pub(crate) fn parse_ext<T: Scalar>(s: &str) -> Option<Ext<T>> {
    let s = s.trim().trim_matches('"');
    if s.eq_ignore_ascii_case("inf") || s == "+inf" || s == "∞" {
        Some(Ext::Inf)
    } else {
        T::parse_literal(s).map(Ext::Fin)
    }
}

/// Parses `[[a, b, c], ...]`.
pub(crate) fn parse_point_list<T: Scalar>(s: &str) -> Result<Vec<[Ext<T>; 3]>, String> {
    let inner = s
        .trim()
        .strip_prefix('[')
        .and_then(|b| b.strip_suffix(']'))
        .ok_or("expected an outer list")?
        .trim();
    let mut out = Vec::new();
    let mut rest = inner;
    while !rest.is_empty() {
        let rest_trim = rest.trim_start_matches([',', ' ', '\n', '\t', '\r']);
        if rest_trim.is_empty() {
            break;
        }
        let open = rest_trim.strip_prefix('[').ok_or("expected `[` starting a breakpoint")?;
        let end = open.find(']').ok_or("unterminated breakpoint")?;
        let fields: Vec<&str> = open[..end].split(',').collect();
        if fields.len() != 3 {
            return Err(format!("breakpoint `[{}]` needs three fields", &open[..end]));
        }
        let mut vals = Vec::with_capacity(3);
        for f in fields {
            vals.push(parse_ext::<T>(f).ok_or_else(|| format!("bad number `{}`", f.trim()))?);
        }
        let [a, b, c]: [Ext<T>; 3] = vals.try_into().map_err(|_| "arity")?;
        out.push([a, b, c]);
        rest = &open[end + 1..];
    }
    Ok(out)
}
