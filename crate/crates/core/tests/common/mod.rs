//! Shared helpers for the integration tests: random curves and brute-force
//! grid oracles.
#![allow(dead_code)]

use netcalc::algebra::{conv, deconv};
use netcalc::trace::Trace;
use netcalc::{Curve, Ext, Rational, Scalar, Segment};
use rand::Rng;

/// Oracle grid step and horizon.
pub const DELTA: f64 = 1.0 / 64.0;
pub const HORIZON: f64 = 64.0;
pub const N: usize = (HORIZON / DELTA) as usize;

pub fn q(x: f64) -> Rational {
    Rational::from_f64(x)
}

/// Random curve with at most `max_bp` breakpoints on a quarter grid, so every
/// breakpoint falls on the oracle grid.
pub fn random_curve<R: Rng>(rng: &mut R, max_bp: usize) -> Curve<Rational> {
    loop {
        let n = rng.gen_range(1..=max_bp);
        let mut t = 0.0;
        let mut segs: Vec<Segment<Rational>> = Vec::new();
        for i in 0..n {
            if i > 0 {
                t += rng.gen_range(1..=12) as f64 * 0.25;
            }
            let jump = if rng.gen_bool(0.4) { rng.gen_range(0..=8) as f64 * 0.25 } else { 0.0 };
            let start = match segs.last() {
                Some(prev) => prev.at(&q(t)),
                None => q(0.0),
            };
            let s = rng.gen_range(0..=12) as f64 * 0.25;
            segs.push(Segment::new(q(t), start + q(jump), q(s)));
        }
        let inf_from = if rng.gen_bool(0.15) {
            Some(segs.last().unwrap().start.clone() + q(rng.gen_range(1..=8) as f64 * 0.25))
        } else {
            None
        };
        if let Ok(c) = Curve::new(segs, inf_from) {
            return c;
        }
    }
}

/// Samples `f` at `k * DELTA` for `k in 0..=n`: (left value, right limit).
pub fn sample(f: &Curve<Rational>, n: usize) -> (Vec<f64>, Vec<f64>) {
    let f = f.to_f64();
    let mut left = Vec::with_capacity(n + 1);
    let mut right = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let t = k as f64 * DELTA;
        left.push(f.eval(&t).to_f64());
        right.push(f.eval_right(&t).to_f64());
    }
    (left, right)
}

/// Brute-force `(f * g)(k DELTA)` for `k in 0..=n`.
pub fn conv_oracle(f: &Curve<Rational>, g: &Curve<Rational>, n: usize) -> Vec<f64> {
    let (fl, _) = sample(f, n);
    let (gl, _) = sample(g, n);
    (0..=n)
        .map(|i| (0..=i).map(|j| fl[i - j] + gl[j]).fold(f64::INFINITY, f64::min))
        .collect()
}

/// Brute-force `(f / g)(k DELTA)` for `k in 1..=n` (index 0 unused), with the
/// shift ranging over `[0, n DELTA]`.
pub fn deconv_oracle(f: &Curve<Rational>, g: &Curve<Rational>, n: usize) -> Vec<f64> {
    let (fl, fr) = sample(f, 2 * n);
    let (gl, gr) = sample(g, n);
    let mut out = vec![0.0; n + 1];
    for i in 1..=n {
        let mut best = f64::NEG_INFINITY;
        for j in 0..=n {
            if gl[j].is_finite() {
                best = best.max(fl[i + j] - gl[j]);
            }
            if gr[j].is_finite() && j < n {
                best = best.max(fr[i + j] - gr[j]);
            }
        }
        out[i] = best;
    }
    out
}

pub fn max_slope(f: &Curve<Rational>) -> f64 {
    f.segments().iter().map(|s| s.slope.to_f64()).fold(0.0, f64::max)
}

pub fn ext_close(a: &Ext<Rational>, b: f64, tol: f64) -> bool {
    match a {
        Ext::Inf => b.is_infinite(),
        Ext::Fin(v) => (v.to_f64() - b).abs() <= tol,
    }
}

/// `conv(f, g)` against the grid oracle, within `max slope * DELTA`.
pub fn conv_matches_oracle(f: &Curve<Rational>, g: &Curve<Rational>) -> Result<(), String> {
    let h = conv(f, g).map_err(|e| e.to_string())?;
    h.validate().map_err(|e| e.to_string())?;
    let oracle = conv_oracle(f, g, N);
    let tol = (max_slope(f).max(max_slope(g)) * DELTA).max(1e-9);
    for (k, want) in oracle.iter().enumerate() {
        let t = q(k as f64 * DELTA);
        if !ext_close(&h.eval(&t), *want, tol) {
            return Err(format!("t={} conv={} oracle={want}\nf={f}\ng={g}\nh={h}", k as f64 * DELTA, h.eval(&t)));
        }
    }
    Ok(())
}

/// `deconv(f, g)` against the grid oracle; an all-infinite result must be
/// one of the analytic cases.
pub fn deconv_matches_oracle(f: &Curve<Rational>, g: &Curve<Rational>) -> Result<(), String> {
    let h = deconv(f, g);
    h.validate().map_err(|e| e.to_string())?;
    if h.is_infinite() {
        let f_unbounded = f.infinite_from().is_some() && g.infinite_from().is_none();
        let tails = f.infinite_from().is_none() && g.infinite_from().is_none() && f.tail_slope() > g.tail_slope();
        let shifted = matches!((f.infinite_from(), g.infinite_from()), (Some(a), Some(b)) if a <= b);
        return if f_unbounded || tails || shifted { Ok(()) } else { Err(format!("unexpected all-inf result\nf={f}\ng={g}")) };
    }
    let oracle = deconv_oracle(f, g, N / 2);
    let tol = (max_slope(f).max(max_slope(g)) * DELTA).max(1e-9);
    for (k, want) in oracle.iter().enumerate().skip(1) {
        let t = q(k as f64 * DELTA);
        if !ext_close(&h.eval(&t), *want, tol) {
            return Err(format!("t={} deconv={} oracle={want}\nf={f}\ng={g}\nh={h}", k as f64 * DELTA, h.eval(&t)));
        }
    }
    Ok(())
}

/// Random trace on a quarter grid with occasional jumps.
pub fn random_trace<R: Rng>(rng: &mut R, horizon: f64) -> Trace {
    let mut ev = vec![(0.0, 0.0)];
    let mut v = 0.0;
    let mut t = 0.0;
    while t < horizon {
        if rng.gen_bool(0.3) {
            v += rng.gen_range(1..=8) as f64 * 0.25;
            ev.push((t, v));
        }
        t += rng.gen_range(1..=8) as f64 * 0.25;
        v += rng.gen_range(0..=8) as f64 * 0.25;
        ev.push((t, v));
    }
    Trace::from_events(&ev, horizon).unwrap()
}
