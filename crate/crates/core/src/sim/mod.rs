//! Sample-path simulation on a uniform time grid: regulated arrival
//! generators, server models and the Monte-Carlo checker.
//!
//! Paths are stored by their values at the grid points `k dt` together with
//! the right limits there; inside a cell a path is linear. All curves handed
//! to the simulator must have their breakpoints on the grid.

pub mod arrivals;
pub mod mc;
pub mod server;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::curve::Curve;
use crate::error::SimError;
use crate::scalar::Ext;
use crate::trace::Trace;

pub use arrivals::{gen_greedy, gen_regulated, ArrivalModel};
pub use mc::{mc_estimate, BoundId, McReport, McRow, McScenario};
pub use server::{serve, ExtraLatency, NodeKind, NodeModel};

/// Relative slack used when comparing simulated quantities with bounds.
pub const PRED_TOL: f64 = 1e-9;

/// A uniform grid `0, dt, ..., n dt`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub dt: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(dt: f64, horizon: f64) -> Result<Self, SimError> {
        if !(dt > 0.0) || !(horizon > 0.0) {
            return Err(SimError::Setup(format!("grid step and horizon must be > 0, got {dt} and {horizon}")));
        }
        let n = (horizon / dt).round();
        if ((n * dt) - horizon).abs() > 1e-9 * horizon.max(1.0) {
            return Err(SimError::Setup(format!("horizon {horizon} is not a multiple of the grid step {dt}")));
        }
        Ok(Grid { dt, n: n as usize })
    }

    pub fn horizon(&self) -> f64 {
        self.n as f64 * self.dt
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    /// Index of a time that must lie on the grid.
    pub fn index_of(&self, t: f64, what: &str) -> Result<usize, SimError> {
        let k = (t / self.dt).round();
        if t < 0.0 || (k * self.dt - t).abs() > 1e-9 * t.max(1.0) {
            return Err(SimError::Setup(format!("{what} = {t} is not on the grid of step {}", self.dt)));
        }
        Ok(k as usize)
    }

    /// Checks that every breakpoint of `c` is a grid point.
    pub fn check_aligned(&self, c: &Curve, what: &str) -> Result<(), SimError> {
        for k in c.knots() {
            self.index_of(k, &format!("breakpoint of {what}"))?;
        }
        if let Some(x) = c.infinite_from() {
            self.index_of(*x, &format!("start of the infinite part of {what}"))?;
        }
        Ok(())
    }

    /// Log-spaced distinct grid indices in `(0, n]`.
    pub fn log_checkpoints(&self, count: usize) -> Vec<usize> {
        let mut out: Vec<usize> = (0..count)
            .map(|i| {
                let f = if count == 1 { 1.0 } else { i as f64 / (count - 1) as f64 };
                let k = (self.n as f64).powf(f).round() as usize;
                k.clamp(1, self.n)
            })
            .collect();
        out.dedup();
        // fill up with unused indices when the grid is coarse
        let mut k = 1;
        while out.len() < count.min(self.n) {
            if !out.contains(&k) {
                out.push(k);
            }
            k += 1;
        }
        out.sort_unstable();
        out
    }
}

/// Values of a curve at the grid points and just after them; infinite
/// values become `f64::INFINITY`.
#[derive(Clone, Debug, PartialEq)]
pub struct Sampled {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

impl Sampled {
    pub fn of(c: &Curve, grid: &Grid, len: usize) -> Self {
        let v = |e: Ext<f64>| e.finite().copied().unwrap_or(f64::INFINITY);
        let left = (0..len).map(|j| v(c.eval(&grid.time(j)))).collect();
        let right = (0..len).map(|j| v(c.eval_right(&grid.time(j)))).collect();
        Sampled { left, right }
    }
}

/// A cumulative path on the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridPath {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

impl GridPath {
    pub fn zero(grid: &Grid) -> Self {
        GridPath { left: vec![0.0; grid.n + 1], right: vec![0.0; grid.n + 1] }
    }

    pub fn len(&self) -> usize {
        self.left.len()
    }

    pub fn is_empty(&self) -> bool {
        self.left.is_empty()
    }

    pub fn to_trace(&self, grid: &Grid) -> Result<Trace, SimError> {
        let mut events = Vec::with_capacity(2 * self.len());
        for k in 0..self.len() {
            let t = grid.time(k);
            events.push((t, self.left[k]));
            if self.right[k] > self.left[k] {
                events.push((t, self.right[k]));
            }
        }
        Ok(Trace::from_events(&events, grid.horizon())?)
    }

    /// Samples a trace at the grid points; the trace must be linear inside
    /// every cell for the round trip to be exact.
    pub fn from_trace(trace: &Trace, grid: &Grid) -> Self {
        let left = (0..=grid.n).map(|k| trace.eval(&grid.time(k))).collect();
        let right = (0..=grid.n).map(|k| trace.eval_right(&grid.time(k))).collect();
        GridPath { left, right }
    }
}

/// Deterministic per-(run, node, purpose) random stream.
pub fn stream(seed: u64, run: u64, node: u64, tag: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((run << 20) | (node << 8) | tag);
    rng
}

/// `min_j x[k - j] + s[j]` for every `k`: the convolution at grid points
/// of a path with a service curve, both linear inside cells.
pub(crate) fn conv_grid(a: &GridPath, s: &Sampled) -> GridPath {
    let n = a.len();
    let mut left = vec![0.0; n];
    let mut right = vec![0.0; n];
    for k in 0..n {
        let (mut l, mut r) = (f64::INFINITY, f64::INFINITY);
        for j in 0..=k {
            let m = k - j;
            l = l.min(a.left[m] + s.left[j]);
            r = r.min(a.right[m] + s.left[j]).min(a.left[m] + s.right[j]);
        }
        left[k] = l;
        right[k] = r.max(l);
    }
    GridPath { left, right }
}

/// `min_{m in [lo, k]} a[m] + s[k - m]`: the convolution restricted to the
/// last `k - lo` time units.
pub(crate) fn conv_range(a: &[f64], s: &[f64], lo: usize, k: usize) -> f64 {
    (lo..=k).map(|m| a[m] + s[k - m]).fold(f64::INFINITY, f64::min)
}

/// `x < y` beyond the predicate tolerance.
pub(crate) fn below(x: f64, y: f64) -> bool {
    if y.is_infinite() {
        return x.is_finite();
    }
    x < y - PRED_TOL * y.abs().max(1.0)
}
