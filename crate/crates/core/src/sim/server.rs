//! Server models. Every model is tight: it serves exactly what its
//! guarantee requires and nothing more.

use rand::Rng;
use rand_distr::{Distribution, Exp};

use super::{conv_grid, Grid, GridPath, Sampled};
use crate::catalog::rate_latency;
use crate::curve::Curve;
use crate::error::SimError;

/// Extra latency added by a violating rate-latency node.
#[derive(Clone, Debug, PartialEq)]
pub enum ExtraLatency {
    Const(f64),
    Uniform { lo: f64, hi: f64 },
    Exp { mean: f64 },
}

impl ExtraLatency {
    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            ExtraLatency::Const(x) => x,
            ExtraLatency::Uniform { lo, hi } => lo + rng.gen::<f64>() * (hi - lo),
            ExtraLatency::Exp { mean } => Exp::new(1.0 / mean).expect("positive mean").sample(rng),
        }
    }

    fn validate(&self) -> Result<(), SimError> {
        let ok = match *self {
            ExtraLatency::Const(x) => x >= 0.0,
            ExtraLatency::Uniform { lo, hi } => lo >= 0.0 && hi >= lo,
            ExtraLatency::Exp { mean } => mean > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(SimError::Setup(format!("invalid extra latency distribution {self:?}")))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum NodeKind {
    /// `D = A * S`.
    ExactServiceCurve(Curve),
    /// The least departures with `D(t0, t) >= A *_{t0} S (t)` whenever
    /// `t - t0 <= ell`. `S` must be zero right after the origin.
    ExactAdaptive { service: Curve, ell: f64 },
    /// Serves as `rl(R, T)`, except that with probability `p` a run uses
    /// the latency `T + X` with `X` drawn from `extra`.
    ViolatingLatencyRate { rate: f64, latency: f64, extra: ExtraLatency, p: f64 },
    /// FIFO link of rate `C` shared with cross traffic at rate `cross_rate`
    /// switched on and off with exponential periods of mean `mean_period`.
    ConstantRateWithCrossTraffic { rate: f64, cross_rate: f64, mean_period: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct NodeModel {
    pub kind: NodeKind,
    /// Random stream of the node.
    pub stream: u64,
}

impl NodeModel {
    pub fn new(kind: NodeKind, stream: u64) -> Result<Self, SimError> {
        let bad = |m: String| Err(SimError::Setup(m));
        match &kind {
            NodeKind::ExactServiceCurve(_) => {}
            NodeKind::ExactAdaptive { service, ell } => {
                if !(*ell > 0.0) {
                    return bad(format!("adaptive window ell must be > 0, got {ell}"));
                }
                if service.eval_right(&0.0).finite().map_or(true, |v| *v > 0.0) {
                    return bad("an adaptive server needs S(0+) = 0".into());
                }
            }
            NodeKind::ViolatingLatencyRate { rate, latency, extra, p } => {
                if !(*rate > 0.0 && *latency >= 0.0) {
                    return bad(format!("violating node needs R > 0 and T >= 0, got R={rate}, T={latency}"));
                }
                if !(0.0..=1.0).contains(p) {
                    return bad(format!("violation probability must lie in [0, 1], got {p}"));
                }
                extra.validate()?;
            }
            NodeKind::ConstantRateWithCrossTraffic { rate, cross_rate, mean_period } => {
                if !(*rate > 0.0 && *cross_rate >= 0.0 && *mean_period > 0.0) {
                    return bad("cross-traffic node needs C > 0, cross_rate >= 0, mean_period > 0".into());
                }
            }
        }
        Ok(NodeModel { kind, stream })
    }

    /// The service curve the node is meant to offer.
    pub fn nominal_service(&self) -> Curve {
        match &self.kind {
            NodeKind::ExactServiceCurve(s) | NodeKind::ExactAdaptive { service: s, .. } => s.clone(),
            NodeKind::ViolatingLatencyRate { rate, latency, .. } => rate_latency(*rate, *latency).expect("validated"),
            NodeKind::ConstantRateWithCrossTraffic { rate, cross_rate, .. } => {
                rate_latency((rate - cross_rate).max(f64::MIN_POSITIVE), 0.0).expect("positive rate")
            }
        }
    }

    /// Checks that every curve the node uses has its breakpoints on the grid.
    pub fn check_grid(&self, grid: &Grid) -> Result<(), SimError> {
        match &self.kind {
            NodeKind::ExactServiceCurve(s) => grid.check_aligned(s, "a node service curve"),
            NodeKind::ExactAdaptive { service, ell } => {
                grid.check_aligned(service, "a node service curve")?;
                grid.index_of(*ell, "ell").map(|_| ())
            }
            NodeKind::ViolatingLatencyRate { latency, .. } => grid.index_of(*latency, "latency").map(|_| ()),
            NodeKind::ConstantRateWithCrossTraffic { .. } => Ok(()),
        }
    }
}

/// Departures of `node` for arrivals `a`.
pub fn serve<R: Rng>(node: &NodeModel, a: &GridPath, grid: &Grid, rng: &mut R) -> Result<GridPath, SimError> {
    node.check_grid(grid)?;
    let len = a.len();
    match &node.kind {
        NodeKind::ExactServiceCurve(s) => Ok(conv_grid(a, &Sampled::of(s, grid, len))),
        NodeKind::ExactAdaptive { service, ell } => {
            let w = grid.index_of(*ell, "ell")?;
            Ok(adaptive(a, &Sampled::of(service, grid, len).left, w))
        }
        NodeKind::ViolatingLatencyRate { rate, latency, extra, p } => {
            let mut lat = *latency;
            if rng.gen::<f64>() < *p {
                // round the extra latency up so the curve stays on the grid
                lat += (extra.sample(rng) / grid.dt).ceil() * grid.dt;
            }
            let s = rate_latency(*rate, lat)?;
            Ok(conv_grid(a, &Sampled::of(&s, grid, len)))
        }
        NodeKind::ConstantRateWithCrossTraffic { rate, cross_rate, mean_period } => {
            Ok(fifo_with_cross(a, grid, *rate, *cross_rate, *mean_period, rng))
        }
    }
}

/// Least departures meeting the adaptive guarantee on windows of `w` cells:
/// `D(k) = max_{i in [k-w, k)} min(D(i) + S(k-i), min_{m in [i,k]} A(m) + S(k-m))`.
fn adaptive(a: &GridPath, s: &[f64], w: usize) -> GridPath {
    let n = a.len();
    let mut d = vec![0.0f64; n];
    for k in 1..n {
        let mut best = d[k - 1];
        let mut m_min = a.left[k] + s[0];
        for i in (k.saturating_sub(w)..k).rev() {
            m_min = m_min.min(a.left[i] + s[k - i]);
            best = best.max((d[i] + s[k - i]).min(m_min));
        }
        d[k] = best.min(a.left[k]);
    }
    GridPath { right: d.clone(), left: d }
}

/// FIFO at rate `C` for the flow plus on-off cross traffic.
fn fifo_with_cross<R: Rng>(a: &GridPath, grid: &Grid, c: f64, cross_rate: f64, mean_period: f64, rng: &mut R) -> GridPath {
    let n = a.len();
    let period = Exp::new(1.0 / mean_period).expect("positive mean");
    // cross traffic cumulative at grid points
    let mut x = vec![0.0; n];
    let (mut t, mut on, mut acc) = (0.0, rng.gen_bool(0.5), 0.0);
    let mut switch = period.sample(rng);
    for k in 1..n {
        let hi = grid.time(k);
        while t < hi {
            let next = switch.min(hi);
            if on {
                acc += cross_rate * (next - t);
            }
            t = next;
            if t >= switch {
                on = !on;
                switch += period.sample(rng);
            }
        }
        x[k] = acc;
    }
    // total arrivals: flow jumps happen at grid points, cross traffic is fluid
    let tot_l: Vec<f64> = (0..n).map(|k| a.left[k] + x[k]).collect();
    let tot_r: Vec<f64> = (0..n).map(|k| a.right[k] + x[k]).collect();
    let mut dl = vec![0.0; n];
    let mut dr = vec![0.0; n];
    for k in 1..n {
        dl[k] = tot_l[k].min(dr[k - 1] + c * grid.dt);
        dr[k] = dl[k];
    }
    // FIFO split: the flow has left once everything that arrived before it has
    let mut out = GridPath { left: vec![0.0; n], right: vec![0.0; n] };
    for k in 1..n {
        let v = flow_share(a, &tot_l, &tot_r, dl[k]);
        out.left[k] = v;
        out.right[k] = v;
    }
    out
}

/// Flow traffic among the first `served` units of the merged input.
fn flow_share(a: &GridPath, tot_l: &[f64], tot_r: &[f64], served: f64) -> f64 {
    let n = tot_l.len();
    // last index m with tot_l[m] <= served
    let m = match tot_l.partition_point(|v| *v <= served) {
        0 => return 0.0,
        p => p - 1,
    };
    if served <= tot_r[m] {
        // inside the jump at m: only the flow jumps, proportional share
        return a.left[m] + (served - tot_l[m]);
    }
    if m + 1 >= n {
        return a.right[m];
    }
    // inside cell (m, m+1]: both inputs are linear there
    let span = tot_l[m + 1] - tot_r[m];
    let f = if span > 0.0 { (served - tot_r[m]) / span } else { 1.0 };
    a.right[m] + f * (a.left[m + 1] - a.right[m])
}
