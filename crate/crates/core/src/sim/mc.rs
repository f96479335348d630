//! Monte-Carlo estimation of violation frequencies for the statistical
//! bounds. Each run draws arrivals, pushes them through the tandem and
//! evaluates one predicate per (bound, checkpoint). Per-node probabilities
//! are measured in a separate calibration pass and fed to the formulas.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use super::{below, conv_grid, conv_range, gen_greedy, gen_regulated, serve, stream, ArrivalModel, Grid, GridPath, NodeModel, Sampled};
use crate::catalog::FlowSpec;
use crate::curve::Curve;
use crate::error::{SimError, TraceError};
use crate::stat::{self, BacklogCondition, EffectiveServiceCurve};

const TAG_RUN: u64 = 0;
const TAG_CALIBRATION: u64 = 1;
/// Two-sided confidence level of the reported radius.
pub const CI_DELTA: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundId {
    Thm3Backlog,
    Thm3Delay,
    Thm4,
    Thm5,
    Thm6,
    Thm7,
    Lemma2,
    Lemma3,
    Lemma4,
}

impl BoundId {
    pub const ALL: [BoundId; 9] = [
        BoundId::Thm3Backlog,
        BoundId::Thm3Delay,
        BoundId::Thm4,
        BoundId::Thm5,
        BoundId::Thm6,
        BoundId::Thm7,
        BoundId::Lemma2,
        BoundId::Lemma3,
        BoundId::Lemma4,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundId::Thm3Backlog => "thm3_backlog",
            BoundId::Thm3Delay => "thm3_delay",
            BoundId::Thm4 => "thm4",
            BoundId::Thm5 => "thm5",
            BoundId::Thm6 => "thm6",
            BoundId::Thm7 => "thm7",
            BoundId::Lemma2 => "lemma2",
            BoundId::Lemma3 => "lemma3",
            BoundId::Lemma4 => "lemma4",
        }
    }
}

impl fmt::Display for BoundId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BoundId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        BoundId::ALL
            .iter()
            .copied()
            .find(|b| b.name() == s.trim())
            .ok_or_else(|| {
                let names: Vec<&str> = BoundId::ALL.iter().map(|b| b.name()).collect();
                format!("unknown bound `{}` (expected one of {})", s.trim(), names.join(", "))
            })
    }
}

/// Everything a Monte-Carlo experiment needs.
#[derive(Clone, Debug)]
pub struct McScenario {
    pub flow: FlowSpec,
    /// `None` sends the envelope itself.
    pub arrivals: Option<ArrivalModel>,
    pub nodes: Vec<NodeModel>,
    pub grid: Grid,
    pub a: f64,
    /// Time scale of the T-bounded curves; `None` picks the smallest `T`
    /// at which the envelope meets every node curve.
    pub t_scale: Option<f64>,
    pub ell: f64,
    /// Grid indices at which predicates are evaluated.
    pub checkpoints: Vec<usize>,
    pub calibration_runs: usize,
}

/// Measured per-node violation frequencies, maximised over time (and over
/// intervals or windows for the adaptive kinds).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NodeCalibration {
    pub plain: f64,
    pub t_bounded: f64,
    pub adaptive: f64,
    pub strong: f64,
    /// Frequency of a window of length `ell` without an empty backlog.
    pub no_empty_window: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct McRow {
    pub bound: BoundId,
    pub t: f64,
    pub trials: u64,
    pub violations: u64,
    pub empirical: f64,
    pub ci: f64,
    pub analytic: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct McReport {
    pub rows: Vec<McRow>,
    pub calibration: Vec<NodeCalibration>,
    /// Time scale used for the T-bounded bound, on the grid.
    pub t_scale: f64,
}

impl McReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bound_id,t,trials,violations,empirical,ci,analytic,pass\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{:.9},{:.9},{:.9},{}\n",
                r.bound, r.t, r.trials, r.violations, r.empirical, r.ci, r.analytic, r.pass
            ));
        }
        out
    }
}

/// Hoeffding radius for `n` Bernoulli trials at level `1 - CI_DELTA`.
pub fn hoeffding_radius(n: u64) -> f64 {
    ((2.0 / CI_DELTA).ln() / (2.0 * n as f64)).sqrt()
}

/// Arrivals followed by the departures of every node, for one run.
pub fn simulate_run(scn: &McScenario, seed: u64, run: u64, tag: u64) -> Result<Vec<GridPath>, SimError> {
    let grid = &scn.grid;
    let a = match &scn.arrivals {
        None => gen_greedy(&scn.flow, grid)?,
        Some(m) => gen_regulated(&scn.flow, m, grid, &mut stream(seed, run, 0, tag))?,
    };
    let mut paths = vec![a];
    for node in &scn.nodes {
        let input = paths.last().expect("nonempty");
        let d = serve(node, input, grid, &mut stream(seed, run, node.stream, tag))?;
        for k in 0..d.len() {
            if below(input.left[k], d.left[k]) || below(input.right[k], d.right[k]) {
                return Err(SimError::Trace(TraceError::Causality {
                    t: grid.time(k),
                    arrivals: input.left[k],
                    departures: d.left[k],
                }));
            }
        }
        paths.push(d);
    }
    Ok(paths)
}

/// Violation counters of one node during calibration.
#[derive(Clone, Debug)]
struct CalCounts {
    plain: Vec<u64>,
    t_bounded: Vec<u64>,
    /// Indexed by `k * (w + 1) + lag`.
    pair: Vec<u64>,
    strong: Vec<u64>,
    no_empty: Vec<u64>,
}

impl CalCounts {
    fn new(n: usize, w: usize) -> Self {
        CalCounts {
            plain: vec![0; n],
            t_bounded: vec![0; n],
            pair: vec![0; n * (w + 1)],
            strong: vec![0; n],
            no_empty: vec![0; n],
        }
    }

    fn add(mut self, o: &CalCounts) -> Self {
        for (x, y) in [
            (&mut self.plain, &o.plain),
            (&mut self.t_bounded, &o.t_bounded),
            (&mut self.pair, &o.pair),
            (&mut self.strong, &o.strong),
            (&mut self.no_empty, &o.no_empty),
        ] {
            x.iter_mut().zip(y).for_each(|(a, b)| *a += b);
        }
        self
    }
}

/// Records which predicates one node violates on one run.
fn calibrate_node(cc: &mut CalCounts, a: &GridPath, d: &GridPath, s: &Sampled, tw: usize, w: usize) {
    let n = a.len();
    let plain = conv_grid(a, s);
    // latest start of a violated interval ending at k
    let mut last_bad: Vec<Option<usize>> = vec![None; n];
    for k in 0..n {
        cc.plain[k] += below(d.left[k], plain.left[k]) as u64;
        let lo_t = k.saturating_sub(tw);
        cc.t_bounded[k] += below(d.left[k], conv_range(&a.left, &s.left, lo_t, k)) as u64;
        let lo = k.saturating_sub(w);
        let mut m_min = f64::INFINITY;
        for i in (lo..=k).rev() {
            m_min = m_min.min(a.left[i] + s.left[k - i]);
            if below(d.left[k], (d.left[i] + s.left[k - i]).min(m_min)) {
                cc.pair[k * (w + 1) + (k - i)] += 1;
                last_bad[k] = last_bad[k].max(Some(i));
            }
        }
        let empty = (lo..=k).any(|i| a.left[i] - d.left[i] <= super::PRED_TOL * a.left[i].max(1.0));
        cc.no_empty[k] += (!empty) as u64;
    }
    // windows [e - w, e] of full length (or the whole horizon if shorter)
    for e in w.min(n - 1)..n {
        let lo = e.saturating_sub(w);
        let bad = (lo..=e).any(|k| last_bad[k].is_some_and(|i| i >= lo));
        cc.strong[e] += bad as u64;
    }
}

fn max_rate(counts: &[u64], runs: u64) -> f64 {
    counts.iter().copied().max().unwrap_or(0) as f64 / runs as f64
}

/// Measures the per-node probabilities in `runs` independent runs.
pub fn calibrate(scn: &McScenario, seed: u64, runs: usize, t_scale: f64) -> Result<Vec<NodeCalibration>, SimError> {
    let grid = &scn.grid;
    let n = grid.n + 1;
    let w = grid.index_of(scn.ell, "ell")?;
    let tw = grid.index_of(t_scale, "T")?;
    let samples: Vec<Sampled> = scn.nodes.iter().map(|nd| Sampled::of(&nd.nominal_service(), grid, n)).collect();
    let zero = || vec![CalCounts::new(n, w); scn.nodes.len()];
    let counts = (0..runs as u64)
        .into_par_iter()
        .map(|run| -> Result<Vec<CalCounts>, SimError> {
            let paths = simulate_run(scn, seed, run, TAG_CALIBRATION)?;
            let mut cc = zero();
            for (h, c) in cc.iter_mut().enumerate() {
                calibrate_node(c, &paths[h], &paths[h + 1], &samples[h], tw, w);
            }
            Ok(cc)
        })
        .try_reduce(zero, |x, y| Ok(x.into_iter().zip(&y).map(|(a, b)| a.add(b)).collect()))?;
    let r = runs.max(1) as u64;
    Ok(counts
        .iter()
        .map(|c| NodeCalibration {
            plain: max_rate(&c.plain, r),
            t_bounded: max_rate(&c.t_bounded, r),
            adaptive: max_rate(&c.pair, r),
            strong: max_rate(&c.strong, r),
            no_empty_window: max_rate(&c.no_empty, r),
        })
        .collect())
}

/// How a bound is checked on one run. `from` and `to` index the paths:
/// arrivals of node `from + 1` and departures of node `to`.
#[derive(Clone, Debug)]
enum Pred {
    Backlog { bound: f64 },
    Delay { bound: f64 },
    /// `D(t) >= inf_{x <= range} A(t - x) + S(x)`.
    Service { from: usize, to: usize, s: Vec<f64>, range: Option<usize> },
    /// `D(t0, t) >= A *_{t0} S (t)` for `t0 = t - w`.
    Interval { from: usize, to: usize, s: Vec<f64>, w: usize },
    /// The same for every `[t0, t]` inside `[t - w, t]`.
    Window { from: usize, to: usize, s: Vec<f64>, w: usize },
}

struct Prepared {
    bound: BoundId,
    pred: Pred,
    analytic: Vec<f64>,
}

/// Violation of the adaptive inequality for some `t0` in `[lo, k]`.
fn interval_violated(a: &[f64], d: &[f64], s: &[f64], lo: usize, k: usize, all: bool) -> bool {
    let mut m_min = f64::INFINITY;
    for i in (lo..=k).rev() {
        m_min = m_min.min(a[i] + s[k - i]);
        if (all || i == lo) && below(d[k], (d[i] + s[k - i]).min(m_min)) {
            return true;
        }
    }
    false
}

/// Virtual delay at grid index `k`: `t - sup { u : A(u) <= D(t) }`.
pub(crate) fn grid_delay(a: &GridPath, y: f64, k: usize, grid: &Grid) -> f64 {
    let tol = super::PRED_TOL * y.abs().max(1.0);
    let Some(m) = (0..=k).rev().find(|&m| a.left[m] <= y + tol) else {
        return 0.0;
    };
    if m == k || a.right[m] > y + tol {
        return grid.time(k - m);
    }
    let (lo, hi) = (a.right[m], a.left[m + 1]);
    let u = grid.time(m) + grid.dt * ((y - lo) / (hi - lo)).clamp(0.0, 1.0);
    grid.time(k) - u
}

impl Pred {
    fn violated(&self, paths: &[GridPath], k: usize, grid: &Grid) -> bool {
        match self {
            Pred::Backlog { bound } => below(*bound, paths[0].left[k] - paths[1].left[k]),
            Pred::Delay { bound } => below(*bound, grid_delay(&paths[0], paths[1].left[k], k, grid)),
            Pred::Service { from, to, s, range } => {
                let lo = range.map_or(0, |r| k.saturating_sub(r));
                below(paths[*to].left[k], conv_range(&paths[*from].left, s, lo, k))
            }
            Pred::Interval { from, to, s, w } => {
                interval_violated(&paths[*from].left, &paths[*to].left, s, k.saturating_sub(*w), k, false)
            }
            Pred::Window { from, to, s, w } => {
                let lo = k.saturating_sub(*w);
                (lo..=k).any(|e| interval_violated(&paths[*from].left, &paths[*to].left, s, lo, e, true))
            }
        }
    }
}

fn sampled(c: &Curve, grid: &Grid, what: &str) -> Result<Vec<f64>, SimError> {
    grid.check_aligned(c, what)?;
    Ok(Sampled::of(c, grid, grid.n + 1).left)
}

/// Smallest grid-aligned `T` at which the envelope meets every node curve.
fn auto_t_scale(scn: &McScenario) -> Result<f64, SimError> {
    let mut t: f64 = 0.0;
    for node in &scn.nodes {
        let esc = EffectiveServiceCurve::plain(node.nominal_service(), 0.0)?;
        t = t.max(stat::choose_t(&scn.flow, &esc)?.0);
    }
    Ok(t)
}

fn prepare(scn: &McScenario, bounds: &[BoundId], cal: &[NodeCalibration], t_scale: f64) -> Result<Vec<Prepared>, SimError> {
    let grid = &scn.grid;
    let h = scn.nodes.len();
    let (a, ell) = (scn.a, scn.ell);
    let w = grid.index_of(ell, "ell")?;
    let times: Vec<f64> = scn.checkpoints.iter().map(|&k| grid.time(k)).collect();
    let constant = |p: f64| vec![p; times.len()];
    let curves: Vec<Curve> = scn.nodes.iter().map(|n| n.nominal_service()).collect();
    let escs = |f: &dyn Fn(&Curve, &NodeCalibration) -> Result<EffectiveServiceCurve, crate::CalcError>| {
        curves.iter().zip(cal).map(|(c, k)| f(c, k)).collect::<Result<Vec<_>, _>>()
    };
    let mut out = Vec::new();
    for &bound in bounds {
        let (pred, analytic) = match bound {
            BoundId::Thm3Backlog | BoundId::Thm3Delay => {
                let esc = EffectiveServiceCurve::plain(curves[0].clone(), cal[0].plain)?;
                let sb = stat::stat_bounds(&scn.flow, &esc);
                let p = constant(sb.violation_probability);
                if bound == BoundId::Thm3Backlog {
                    (Pred::Backlog { bound: sb.backlog.to_f64() }, p)
                } else {
                    (Pred::Delay { bound: sb.delay.to_f64() }, p)
                }
            }
            BoundId::Thm4 => {
                let nodes = escs(&|c, k| EffectiveServiceCurve::plain(c.clone(), k.plain))?;
                let r = stat::concat_thm4(&nodes, &a, &0.0)?;
                let s = sampled(&r.network.curve, grid, "the network curve")?;
                (Pred::Service { from: 0, to: h, s, range: None }, times.iter().map(|t| r.violation.at(t)).collect())
            }
            BoundId::Thm5 => {
                let eps = cal.iter().map(|k| k.t_bounded).fold(0.0, f64::max);
                let nodes = escs(&|c, _| EffectiveServiceCurve::t_bounded(c.clone(), eps, t_scale))?;
                let r = stat::concat_thm5(&nodes, &a)?;
                let range = r.convolution_range.expect("T-bounded result has a range");
                let s = sampled(&r.network.curve, grid, "the network curve")?;
                let range = grid.index_of(range, "convolution range")?;
                (Pred::Service { from: 0, to: h, s, range: Some(range) }, constant(r.network.epsilon))
            }
            BoundId::Thm6 => {
                let nodes = escs(&|c, k| EffectiveServiceCurve::l_adaptive(c.clone(), k.adaptive, ell))?;
                let r = stat::concat_thm6(&nodes, &a)?;
                let s = sampled(&r.network.curve, grid, "the network curve")?;
                (Pred::Interval { from: 0, to: h, s, w }, constant(r.network.epsilon))
            }
            BoundId::Thm7 => {
                let nodes = escs(&|c, k| EffectiveServiceCurve::strong_l_adaptive(c.clone(), k.strong, ell))?;
                let r = stat::concat_thm7(&nodes)?;
                let s = sampled(&r.network.curve, grid, "the network curve")?;
                (Pred::Window { from: 0, to: h, s, w }, constant(r.network.epsilon))
            }
            BoundId::Lemma2 => {
                let esc = EffectiveServiceCurve::l_adaptive(curves[0].clone(), cal[0].adaptive, ell)?;
                let st = stat::strengthen_lemma2(&esc, &a)?;
                let s = sampled(&st.curve, grid, "the strengthened curve")?;
                (Pred::Window { from: 0, to: 1, s, w }, constant(st.epsilon))
            }
            BoundId::Lemma3 => {
                let esc = EffectiveServiceCurve::l_adaptive(curves[0].clone(), cal[0].adaptive, ell)?;
                let cond = BacklogCondition::EmptyBacklog { epsilon1: cal[0].no_empty_window, a };
                let rec = stat::recover_lemma3(&esc, &cond)?;
                let s = sampled(&rec.esc.curve, grid, "the recovered curve")?;
                (Pred::Service { from: 0, to: 1, s, range: None }, constant(rec.esc.epsilon))
            }
            BoundId::Lemma4 => {
                let esc = EffectiveServiceCurve::strong_l_adaptive(curves[0].clone(), cal[0].strong, ell)?;
                let cond = BacklogCondition::EmptyBacklog { epsilon1: cal[0].no_empty_window, a };
                let rec = stat::recover_lemma4(&esc, &cond)?;
                let s = sampled(&rec.esc.curve, grid, "the recovered curve")?;
                (Pred::Service { from: 0, to: 1, s, range: None }, constant(rec.esc.epsilon))
            }
        };
        out.push(Prepared { bound, pred, analytic });
    }
    Ok(out)
}

/// Runs the calibration pass and `runs` checked runs; results depend only
/// on the scenario, the seed and the run counts.
pub fn mc_estimate(scn: &McScenario, bounds: &[BoundId], runs: usize, seed: u64) -> Result<McReport, SimError> {
    if runs == 0 {
        return Err(SimError::Setup("at least one run is needed".into()));
    }
    if scn.nodes.is_empty() {
        return Err(SimError::Setup("the tandem has no nodes".into()));
    }
    let grid = &scn.grid;
    if let Some(&k) = scn.checkpoints.iter().find(|&&k| k == 0 || k > grid.n) {
        return Err(SimError::Setup(format!("checkpoint index {k} lies outside (0, {}]", grid.n)));
    }
    grid.index_of(scn.a, "a")?;
    let t_raw = match scn.t_scale {
        Some(t) => t,
        None => auto_t_scale(scn)?,
    };
    let t_scale = (t_raw / grid.dt - 1e-9).ceil().max(0.0) * grid.dt;
    let cal = calibrate(scn, seed, scn.calibration_runs.max(1), t_scale)?;
    let prepared = prepare(scn, bounds, &cal, t_scale)?;
    let cps = &scn.checkpoints;
    let width = prepared.len() * cps.len();
    let counts = (0..runs as u64)
        .into_par_iter()
        .map(|run| -> Result<Vec<u64>, SimError> {
            let paths = simulate_run(scn, seed, run, TAG_RUN)?;
            let mut v = vec![0u64; width];
            for (b, p) in prepared.iter().enumerate() {
                for (c, &k) in cps.iter().enumerate() {
                    v[b * cps.len() + c] = p.pred.violated(&paths, k, grid) as u64;
                }
            }
            Ok(v)
        })
        .try_reduce(|| vec![0u64; width], |mut x, y| {
            x.iter_mut().zip(&y).for_each(|(a, b)| *a += b);
            Ok(x)
        })?;
    let trials = runs as u64;
    let ci = hoeffding_radius(trials);
    let mut rows = Vec::with_capacity(width);
    for (b, p) in prepared.iter().enumerate() {
        for (c, &k) in cps.iter().enumerate() {
            let violations = counts[b * cps.len() + c];
            let empirical = violations as f64 / trials as f64;
            let analytic = p.analytic[c];
            rows.push(McRow {
                bound: p.bound,
                t: grid.time(k),
                trials,
                violations,
                empirical,
                ci,
                analytic,
                pass: empirical - ci <= analytic,
            });
        }
    }
    Ok(McReport { rows, calibration: cal, t_scale })
}
