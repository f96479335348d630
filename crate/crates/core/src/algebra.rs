//! Min-plus operators on [`Curve`]s.
//!
//! Both convolution and deconvolution decompose their operands into closed
//! affine pieces. For one pair of pieces the optimum over the split point sits
//! on a boundary of the feasible range, so the pair contributes a function of
//! `t` that is affine between at most four knots. The result is the lower
//! (convolution) or upper (deconvolution) envelope of those contributions,
//! computed exactly on every elementary interval between knots.

use crate::curve::{Curve, Segment};
use crate::error::CurveError;
use crate::scalar::{Ext, Scalar};

/// Default cap on the number of breakpoints of any operator result.
pub const DEFAULT_BREAKPOINT_LIMIT: usize = 100_000;

/// Closed affine piece `x -> v + s (x - lo)` on `[lo, hi]`.
#[derive(Clone, Debug)]
struct Piece<T> {
    lo: T,
    hi: Option<T>,
    v: T,
    s: T,
}

impl<T: Scalar> Piece<T> {
    fn at(&self, x: &T) -> T {
        self.v.clone() + self.s.clone() * (x.clone() - self.lo.clone())
    }
}

/// Closed pieces of the finite part. `with_origin` adds the point `f(0) = 0`.
fn pieces<T: Scalar>(f: &Curve<T>, with_origin: bool) -> Vec<Piece<T>> {
    let mut out = Vec::with_capacity(f.segments().len() + 1);
    if with_origin {
        out.push(Piece { lo: T::zero(), hi: Some(T::zero()), v: T::zero(), s: T::zero() });
    }
    for (i, s) in f.segments().iter().enumerate() {
        out.push(Piece { lo: s.start.clone(), hi: f.seg_end(i), v: s.value.clone(), s: s.slope.clone() });
    }
    out
}

fn add_opt<T: Scalar>(a: &Option<T>, b: &Option<T>) -> Option<T> {
    match (a, b) {
        (Some(a), Some(b)) => Some(a.clone() + b.clone()),
        _ => None,
    }
}

fn sort_dedup<T: Scalar>(mut v: Vec<T>) -> Vec<T> {
    v.sort_by(|a, b| a.partial_cmp(b).expect("comparable scalars"));
    v.dedup_by(|b, a| a.approx_eq(b));
    v
}

fn knot_index<T: Scalar>(knots: &[T], x: &T) -> usize {
    knots.partition_point(|k| k.approx_lt(x))
}

/// Affine contribution on one elementary interval: value at its left end and
/// slope.
type Line<T> = (T, T);

/// Elementary-interval sweep shared by both operators.
///
/// `domains` holds, per candidate, the closed `t`-range on which it is
/// defined; `line(i, left, probe)` returns the candidate's affine form on an
/// interval starting at `left`, where `probe` is an interior point.
/// Returns segments plus the point where no candidate is defined any more.
fn sweep<T: Scalar>(
    knots: &[T],
    end: Option<&T>,
    domains: &[(T, Option<T>)],
    lower: bool,
    limit: usize,
    line: impl Fn(usize, &T, &T) -> Line<T>,
) -> Result<(Vec<Segment<T>>, Option<T>), CurveError> {
    let n_int = knots.len();
    // interval j = [knots[j], knots[j+1]] (or up to `end` / infinity for the last)
    let mut spans: Vec<(usize, usize, usize)> = Vec::with_capacity(domains.len());
    for (i, (lo, hi)) in domains.iter().enumerate() {
        let first = knot_index(knots, lo);
        let last = match hi {
            None => n_int,
            Some(h) => {
                let k = knot_index(knots, h);
                // a domain end past the last knot only occurs when it reaches the cutoff
                if k < n_int && knots[k].approx_eq(h) {
                    k
                } else {
                    n_int
                }
            }
        };
        if first < last {
            spans.push((first, last, i));
        }
    }
    spans.sort_by_key(|s| s.0);

    let mut segs: Vec<Segment<T>> = Vec::new();
    let mut active: Vec<(usize, usize)> = Vec::new();
    let mut next = 0;
    let mut lines: Vec<Line<T>> = Vec::new();
    for j in 0..n_int {
        while next < spans.len() && spans[next].0 == j {
            active.push((spans[next].1, spans[next].2));
            next += 1;
        }
        active.retain(|&(last, _)| last > j);
        let left = &knots[j];
        let right = if j + 1 < n_int { Some(&knots[j + 1]) } else { end };
        if active.is_empty() {
            return Ok((segs, Some(left.clone())));
        }
        let probe = match right {
            Some(r) => (left.clone() + r.clone()) / T::from_int(2),
            None => left.clone() + T::one(),
        };
        lines.clear();
        lines.extend(active.iter().map(|&(_, i)| line(i, left, &probe)));
        envelope(&mut lines, left, right, lower, &mut segs);
        if segs.len() > limit {
            return Err(CurveError::TooManyBreakpoints { needed: segs.len(), limit });
        }
    }
    Ok((segs, end.cloned()))
}

/// Appends the lower (or upper) envelope of `lines` on `[left, right]`.
fn envelope<T: Scalar>(
    lines: &mut [Line<T>],
    left: &T,
    right: Option<&T>,
    lower: bool,
    out: &mut Vec<Segment<T>>,
) {
    if !lower {
        for l in lines.iter_mut() {
            l.0 = -l.0.clone();
            l.1 = -l.1.clone();
        }
    }
    let better = |a: &Line<T>, b: &Line<T>| a.0.approx_lt(&b.0) || (a.0.approx_eq(&b.0) && a.1 < b.1);
    let mut cur = 0;
    for i in 1..lines.len() {
        if better(&lines[i], &lines[cur]) {
            cur = i;
        }
    }
    let width = right.map(|r| r.clone() - left.clone());
    let mut off = T::zero();
    push_seg(out, left.clone(), lines[cur].0.clone(), lines[cur].1.clone(), lower);
    loop {
        let (cv, cs) = lines[cur].clone();
        let mut best: Option<(T, usize)> = None;
        for (k, (v, s)) in lines.iter().enumerate() {
            if !s.approx_lt(&cs) {
                continue;
            }
            let mut u = (v.clone() - cv.clone()) / (cs.clone() - s.clone());
            if u < off {
                u = off.clone();
            }
            let take = match &best {
                None => true,
                Some((bu, bk)) => u.approx_lt(bu) || (u.approx_eq(bu) && *s < lines[*bk].1),
            };
            if take {
                best = Some((u, k));
            }
        }
        let Some((u, k)) = best else { break };
        if let Some(w) = &width {
            if !u.approx_lt(w) {
                break;
            }
        }
        let value = lines[k].0.clone() + lines[k].1.clone() * u.clone();
        push_seg(out, left.clone() + u.clone(), value, lines[k].1.clone(), lower);
        off = u;
        cur = k;
    }
}

fn push_seg<T: Scalar>(out: &mut Vec<Segment<T>>, start: T, v: T, s: T, lower: bool) {
    let (v, s) = if lower { (v, s) } else { (-v, -s) };
    if let Some(last) = out.last_mut() {
        if last.start.approx_eq(&start) {
            last.value = v;
            last.slope = s;
            return;
        }
    }
    out.push(Segment::new(start, v, s));
}

fn finish<T: Scalar>(segs: Vec<Segment<T>>, inf_from: Option<T>, limit: usize) -> Result<Curve<T>, CurveError> {
    if segs.is_empty() {
        return Ok(Curve::infinite());
    }
    let c = Curve::from_raw(segs, inf_from);
    if c.breakpoint_count() > limit {
        return Err(CurveError::TooManyBreakpoints { needed: c.breakpoint_count(), limit });
    }
    Ok(c)
}

/// Min-plus convolution `(f * g)(t) = inf_{0 <= s <= t} f(t - s) + g(s)`.
pub fn conv<T: Scalar>(f: &Curve<T>, g: &Curve<T>) -> Result<Curve<T>, CurveError> {
    conv_with_limit(f, g, DEFAULT_BREAKPOINT_LIMIT)
}

pub fn conv_with_limit<T: Scalar>(f: &Curve<T>, g: &Curve<T>, limit: usize) -> Result<Curve<T>, CurveError> {
    let pf = pieces(f, true);
    let pg = pieces(g, true);
    let mut pairs = Vec::with_capacity(pf.len() * pg.len());
    let mut domains = Vec::with_capacity(pf.len() * pg.len());
    let mut knots = vec![T::zero()];
    for (i, p) in pf.iter().enumerate() {
        for (j, q) in pg.iter().enumerate() {
            let lo = p.lo.clone() + q.lo.clone();
            let hi = add_opt(&p.hi, &q.hi);
            knots.push(lo.clone());
            if let Some(h) = &hi {
                knots.push(h.clone());
            }
            if let Some(qh) = &q.hi {
                knots.push(p.lo.clone() + qh.clone());
            }
            if let Some(ph) = &p.hi {
                knots.push(ph.clone() + q.lo.clone());
            }
            pairs.push((i, j));
            domains.push((lo, hi));
        }
    }
    let knots = sort_dedup(knots);
    if knots.len() > limit.saturating_mul(4) {
        return Err(CurveError::TooManyBreakpoints { needed: knots.len(), limit });
    }
    let (segs, inf_from) = sweep(&knots, None, &domains, true, limit, |idx, left, probe| {
        let (p, q) = (&pf[pairs[idx].0], &pg[pairs[idx].1]);
        if p.s > q.s {
            // the split point sits at the left end of f's piece, or as far right as g allows
            match &q.hi {
                Some(qh) if probe.clone() - qh.clone() > p.lo => {
                    (p.at(&(left.clone() - qh.clone())) + q.at(qh), p.s.clone())
                }
                _ => (p.v.clone() + q.at(&(left.clone() - p.lo.clone())), q.s.clone()),
            }
        } else {
            match &p.hi {
                Some(ph) if *ph <= probe.clone() - q.lo.clone() => {
                    (p.at(ph) + q.at(&(left.clone() - ph.clone())), q.s.clone())
                }
                _ => (p.at(&(left.clone() - q.lo.clone())) + q.v.clone(), p.s.clone()),
            }
        }
    })?;
    finish(segs, inf_from, limit)
}

/// Min-plus deconvolution `(f / g)(t) = sup_{s >= 0} f(t + s) - g(s)`.
///
/// Unbounded results are detected from the tails; the all-infinite curve is a
/// legal result.
pub fn deconv<T: Scalar>(f: &Curve<T>, g: &Curve<T>) -> Curve<T> {
    // where the result becomes infinite
    let cutoff: Option<T> = match (f.infinite_from(), g.infinite_from()) {
        (Some(_), None) => return Curve::infinite(),
        (Some(xf), Some(xg)) => Some(T::max_of(T::zero(), xf.clone() - xg.clone())),
        (None, Some(_)) => None,
        (None, None) => {
            if f.tail_slope() > g.tail_slope() {
                return Curve::infinite();
            }
            None
        }
    };
    if cutoff.as_ref().is_some_and(|c| c.approx_zero()) {
        return Curve::infinite();
    }
    let pf = pieces(f, false);
    let pg = pieces(g, true);
    let mut pairs = Vec::new();
    let mut domains = Vec::new();
    let mut knots = vec![T::zero()];
    let in_range = |x: &T| *x > T::zero() && cutoff.as_ref().map_or(true, |c| x < c);
    for (i, p) in pf.iter().enumerate() {
        for (j, q) in pg.iter().enumerate() {
            let lo = match &q.hi {
                Some(qh) => T::max_of(T::zero(), p.lo.clone() - qh.clone()),
                None => T::zero(),
            };
            let hi = p.hi.clone().map(|ph| ph - q.lo.clone());
            if hi.as_ref().is_some_and(|h| !lo.approx_lt(h)) {
                continue;
            }
            if cutoff.as_ref().is_some_and(|c| !lo.approx_lt(c)) {
                continue;
            }
            let mut cand = vec![lo.clone(), p.lo.clone() - q.lo.clone()];
            if let Some(h) = &hi {
                cand.push(h.clone());
            }
            if let (Some(ph), Some(qh)) = (&p.hi, &q.hi) {
                cand.push(ph.clone() - qh.clone());
            }
            knots.extend(cand.into_iter().filter(|x| in_range(x)));
            pairs.push((i, j));
            domains.push((lo, hi));
        }
    }
    let knots = sort_dedup(knots);
    let (segs, _) = sweep(&knots, cutoff.as_ref(), &domains, false, usize::MAX, |idx, left, probe| {
        let (p, q) = (&pf[pairs[idx].0], &pg[pairs[idx].1]);
        if p.s > q.s {
            // push the shift as far right as both pieces allow
            match (&q.hi, &p.hi) {
                (Some(qh), Some(ph)) if *ph <= probe.clone() + qh.clone() => {
                    (p.at(ph) - q.at(&(ph.clone() - left.clone())), q.s.clone())
                }
                (Some(qh), _) => (p.at(&(left.clone() + qh.clone())) - q.at(qh), p.s.clone()),
                (None, Some(ph)) => (p.at(ph) - q.at(&(ph.clone() - left.clone())), q.s.clone()),
                (None, None) => unreachable!("tail dominance is handled analytically"),
            }
        } else if q.lo >= p.lo.clone() - probe.clone() {
            (p.at(&(left.clone() + q.lo.clone())) - q.v.clone(), p.s.clone())
        } else {
            (p.v.clone() - q.at(&(p.lo.clone() - left.clone())), q.s.clone())
        }
    })
    .expect("no limit on deconvolution");
    Curve::from_raw(segs, cutoff)
}

/// The impulse `delta_tau`: 0 on `(-inf, tau]`, `+inf` afterwards.
pub fn impulse<T: Scalar>(tau: T) -> Result<Curve<T>, CurveError> {
    if tau < T::zero() {
        return Err(CurveError::Argument(format!("impulse position must be >= 0, got {tau}")));
    }
    if tau.approx_zero() {
        return Ok(Curve::infinite());
    }
    Curve::new(vec![Segment::new(T::zero(), T::zero(), T::zero())], Some(tau))
}

/// `f(t - tau)`, i.e. `f * delta_tau`, without the general algorithm.
pub fn shift_right<T: Scalar>(f: &Curve<T>, tau: &T) -> Curve<T> {
    if tau.approx_zero() {
        return f.clone();
    }
    let mut segs = vec![Segment::new(T::zero(), T::zero(), T::zero())];
    segs.extend(
        f.segments().iter().map(|s| Segment::new(s.start.clone() + tau.clone(), s.value.clone(), s.slope.clone())),
    );
    Curve::from_raw(segs, f.infinite_from().map(|x| x.clone() + tau.clone()))
}

fn union_knots<T: Scalar>(f: &Curve<T>, g: &Curve<T>, end: Option<&T>) -> Vec<T> {
    let mut k = f.knots();
    k.extend(g.knots());
    let k = sort_dedup(k);
    match end {
        Some(e) => k.into_iter().filter(|x| x.approx_lt(e)).collect(),
        None => k,
    }
}

fn line_right<T: Scalar>(f: &Curve<T>, t: &T) -> Option<Line<T>> {
    match (f.eval_right(t), f.slope_right(t)) {
        (Ext::Fin(v), Ext::Fin(s)) => Some((v, s)),
        _ => None,
    }
}

/// Pointwise minimum.
pub fn min_pointwise<T: Scalar>(f: &Curve<T>, g: &Curve<T>) -> Curve<T> {
    let end = match (f.infinite_from(), g.infinite_from()) {
        (Some(a), Some(b)) => Some(T::max_of(a.clone(), b.clone())),
        _ => None,
    };
    if end.as_ref().is_some_and(|e| e.approx_zero()) {
        return Curve::infinite();
    }
    let knots = union_knots(f, g, end.as_ref());
    let mut segs = Vec::new();
    let mut lines = Vec::with_capacity(2);
    for (j, left) in knots.iter().enumerate() {
        let right = knots.get(j + 1).or(end.as_ref());
        lines.clear();
        lines.extend(line_right(f, left));
        lines.extend(line_right(g, left));
        envelope(&mut lines, left, right, true, &mut segs);
    }
    Curve::from_raw(segs, end)
}

/// Pointwise sum.
pub fn add_pointwise<T: Scalar>(f: &Curve<T>, g: &Curve<T>) -> Curve<T> {
    let end = match (f.infinite_from(), g.infinite_from()) {
        (Some(a), Some(b)) => Some(T::min_of(a.clone(), b.clone())),
        (Some(a), None) | (None, Some(a)) => Some(a.clone()),
        (None, None) => None,
    };
    if end.as_ref().is_some_and(|e| e.approx_zero()) {
        return Curve::infinite();
    }
    let segs = union_knots(f, g, end.as_ref())
        .into_iter()
        .map(|t| {
            let (fv, fs) = line_right(f, &t).expect("finite before the cutoff");
            let (gv, gs) = line_right(g, &t).expect("finite before the cutoff");
            Segment::new(t, fv + gv, fs + gs)
        })
        .collect();
    Curve::from_raw(segs, end)
}

/// `f(t) <= g(t)` for every `t` in `(0, horizon]`, up to the scalar tolerance.
pub fn le_on<T: Scalar>(f: &Curve<T>, g: &Curve<T>, horizon: &T) -> bool {
    let mut knots = union_knots(f, g, Some(horizon));
    knots.push(horizon.clone());
    let right_ok = |t: &T| f.eval_right(t).approx_le(&g.eval_right(t));
    let left_ok = |t: &T| f.eval(t).approx_le(&g.eval(t));
    knots.iter().enumerate().all(|(j, t)| {
        let is_end = j + 1 == knots.len();
        (is_end || right_ok(t)) && (t.approx_zero() || left_ok(t))
    })
}

/// Subadditivity on `[0, horizon]`, tested as `f <= f * f` there (the
/// reverse inequality always holds because `f(0) = 0`).
pub fn is_subadditive<T: Scalar>(f: &Curve<T>, horizon: &T) -> Result<bool, CurveError> {
    if *horizon <= T::zero() {
        return Err(CurveError::Argument(format!("horizon must be positive, got {horizon}")));
    }
    let ff = conv(f, f)?;
    Ok(le_on(f, &ff, horizon))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    fn q(n: i64) -> Rational {
        Rational::from_int(n)
    }
    fn seg(t: i64, v: i64, s: i64) -> Segment<Rational> {
        Segment::new(q(t), q(v), q(s))
    }
    fn tb(s: i64, r: i64) -> Curve<Rational> {
        Curve::new(vec![seg(0, s, r)], None).unwrap()
    }
    fn rl(r: i64, t: i64) -> Curve<Rational> {
        if t == 0 {
            return Curve::new(vec![seg(0, 0, r)], None).unwrap();
        }
        Curve::new(vec![seg(0, 0, 0), seg(t, 0, r)], None).unwrap()
    }

    #[test]
    fn conv_token_bucket_with_rate_latency() {
        let h = conv(&tb(4, 1), &rl(2, 1)).unwrap();
        let want = Curve::new(vec![seg(0, 0, 0), seg(1, 0, 2), seg(5, 8, 1)], None).unwrap();
        assert_eq!(h, want);
    }

    #[test]
    fn conv_rate_latencies() {
        assert_eq!(conv(&rl(2, 1), &rl(3, 2)).unwrap(), rl(2, 3));
    }

    #[test]
    fn impulse_is_neutral_and_shifts() {
        let f = tb(4, 1);
        assert_eq!(conv(&f, &impulse(q(0)).unwrap()).unwrap(), f);
        assert_eq!(deconv(&f, &impulse(q(0)).unwrap()), f);
        let sh = conv(&f, &impulse(q(3)).unwrap()).unwrap();
        assert_eq!(sh, shift_right(&f, &q(3)));
        assert_eq!(sh.eval(&q(5)), Ext::Fin(q(6)));
        let left = deconv(&f, &impulse(q(3)).unwrap());
        assert_eq!(left.eval(&q(1)), Ext::Fin(q(8)));
    }

    #[test]
    fn deconv_cases() {
        let h = deconv(&tb(4, 1), &rl(2, 1));
        assert_eq!(h, tb(5, 1));
        assert!(deconv(&tb(4, 2), &rl(1, 1)).is_infinite());
        assert_eq!(deconv(&tb(10, 1), &rl(2, 3)), tb(13, 1));
    }

    #[test]
    fn pointwise_ops() {
        let m = min_pointwise(&tb(4, 1), &tb(1, 2));
        let want = Curve::new(vec![seg(0, 1, 2), seg(3, 7, 1)], None).unwrap();
        assert_eq!(m, want);
        let f = tb(4, 1);
        assert_eq!(min_pointwise(&f, &f), f);
        assert_eq!(add_pointwise(&f, &Curve::zero()), f);
    }

    #[test]
    fn subadditivity() {
        assert!(is_subadditive(&tb(4, 1), &q(64)).unwrap());
        assert!(!is_subadditive(&rl(2, 1), &q(64)).unwrap());
        assert!(is_subadditive(&rl(3, 0), &q(64)).unwrap());
    }

    #[test]
    fn breakpoint_limit_is_reported() {
        let f = Curve::new(vec![seg(0, 0, 1), seg(1, 1, 3), seg(2, 4, 5)], None).unwrap();
        let err = conv_with_limit(&f, &f, 1).unwrap_err();
        assert!(matches!(err, CurveError::TooManyBreakpoints { limit: 1, .. }));
    }
}
