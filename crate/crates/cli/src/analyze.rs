//! Bound reports: one row per concatenation variant, evaluated exactly.

use anyhow::{anyhow, bail, Context, Result};
use netcalc::det::{concat_min, det_bounds};
use netcalc::stat::{
    choose_t, concat_thm4, concat_thm5, concat_thm6, concat_thm7, optimize_a, stat_bounds, ConcatKind,
    ConcatResult, EffectiveServiceCurve, Objective,
};
use netcalc::{Curve, Ext, Rational, Scalar};

use crate::scenario::{Lit, Scenario, Theorem, TimeScale};

pub const HEADER: [&str; 9] =
    ["scenario", "theorem", "a", "horizon", "epsilon", "b_max", "d_max", "convolution_range", "network_curve"];

#[derive(Clone, Debug, PartialEq)]
pub struct BoundRow {
    pub scenario: String,
    pub theorem: String,
    pub a: Option<f64>,
    /// `t` for thm4, `T` for thm5, `ell` for the adaptive variants.
    pub horizon: Option<f64>,
    pub epsilon: f64,
    pub b_max: f64,
    pub d_max: f64,
    pub convolution_range: Option<f64>,
    pub network_curve: String,
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, num)
}

fn num(x: f64) -> String {
    if x.is_infinite() {
        "inf".into()
    } else {
        format!("{x}")
    }
}

impl BoundRow {
    fn record(&self) -> [String; 9] {
        [
            self.scenario.clone(),
            self.theorem.clone(),
            opt(self.a),
            opt(self.horizon),
            num(self.epsilon),
            num(self.b_max),
            num(self.d_max),
            opt(self.convolution_range),
            self.network_curve.clone(),
        ]
    }
}

pub fn write_csv<W: std::io::Write>(rows: &[BoundRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in rows {
        w.write_record(r.record())?;
    }
    w.flush()?;
    Ok(())
}

type Q = Rational;

struct Ctx {
    flow: netcalc::catalog::FlowSpec<Q>,
    services: Vec<Curve<Q>>,
    eps: Vec<Q>,
}

impl Ctx {
    fn new(scn: &Scenario) -> Result<Ctx> {
        Ok(Ctx {
            flow: scn.flow_spec()?,
            services: scn.services()?,
            eps: scn.nodes.iter().map(|n| n.epsilon.get()).collect(),
        })
    }

    fn nodes<F>(&self, mk: F) -> Result<Vec<EffectiveServiceCurve<Q>>>
    where
        F: Fn(Curve<Q>, Q) -> Result<EffectiveServiceCurve<Q>, netcalc::CalcError>,
    {
        self.services
            .iter()
            .zip(&self.eps)
            .map(|(s, e)| Ok(mk(s.clone(), e.clone())?))
            .collect()
    }

    fn row(&self, scn: &Scenario, theorem: &str, a: Option<&Q>, horizon: Option<&Q>, epsilon: Q, res: &ConcatResult<Q>) -> BoundRow {
        let b = stat_bounds(&self.flow, &res.network);
        BoundRow {
            scenario: scn.name.clone(),
            theorem: theorem.into(),
            a: a.map(Scalar::to_f64),
            horizon: horizon.map(Scalar::to_f64),
            epsilon: epsilon.to_f64(),
            b_max: b.backlog.to_f64(),
            d_max: b.delay.to_f64(),
            convolution_range: res.convolution_range.as_ref().map(Scalar::to_f64),
            network_curve: res.network.curve.to_f64().to_string(),
        }
    }

    /// The largest per-node time scale at which the envelope meets the curve.
    fn auto_t(&self) -> Result<Q> {
        let mut best = Q::from_int(0);
        for (i, esc) in self.nodes(EffectiveServiceCurve::plain)?.iter().enumerate() {
            let (t, _) = choose_t(&self.flow, esc).with_context(|| format!("T = auto fails at node {}", i + 1))?;
            best = Q::max_of(best, t);
        }
        Ok(best)
    }

    fn t_scale(&self, scn: &Scenario) -> Result<Q> {
        match &scn.t_scale {
            TimeScale::Value(v) => Ok(v.get()),
            TimeScale::Auto => self.auto_t(),
        }
    }

    fn theorem(&self, scn: &Scenario, th: Theorem) -> Result<BoundRow> {
        let a: Q = scn.a.get();
        let ell: Q = scn.ell.get();
        let row = match th {
            Theorem::Thm4 => {
                let t: Q = scn.eval_time().get();
                let res = concat_thm4(&self.nodes(EffectiveServiceCurve::plain)?, &a, &t)?;
                self.row(scn, "thm4", Some(&a), Some(&t), res.violation.at(&t), &res)
            }
            Theorem::Thm5 => {
                let tt = self.t_scale(scn)?;
                let res = concat_thm5(&self.nodes(|s, e| EffectiveServiceCurve::t_bounded(s, e, tt.clone()))?, &a)?;
                self.row(scn, "thm5", Some(&a), Some(&tt), res.network.epsilon.clone(), &res)
            }
            Theorem::Thm6 => {
                let res = concat_thm6(&self.nodes(|s, e| EffectiveServiceCurve::l_adaptive(s, e, ell.clone()))?, &a)?;
                self.row(scn, "thm6", Some(&a), Some(&ell), res.network.epsilon.clone(), &res)
            }
            Theorem::Thm7 => {
                let res = concat_thm7(&self.nodes(|s, e| EffectiveServiceCurve::strong_l_adaptive(s, e, ell.clone()))?)?;
                self.row(scn, "thm7", None, Some(&ell), res.network.epsilon.clone(), &res)
            }
            Theorem::Auto => unreachable!("expanded by the caller"),
        };
        Ok(row)
    }

    fn deterministic(&self, scn: &Scenario) -> Result<BoundRow> {
        let net = concat_min(&self.services)?;
        let d = det_bounds(&self.flow, &net);
        let ext = |e: &Ext<Q>| e.to_f64();
        Ok(BoundRow {
            scenario: scn.name.clone(),
            theorem: "det".into(),
            a: None,
            horizon: None,
            epsilon: 0.0,
            b_max: ext(&d.backlog),
            d_max: ext(&d.delay),
            convolution_range: None,
            network_curve: net.to_f64().to_string(),
        })
    }
}

/// Rows for the deterministic network curve and the selected theorems.
///
/// With `theorem = auto`, variants that do not apply are skipped and listed
/// in the returned notes; an explicit selection turns them into errors.
pub fn analyze(scn: &Scenario) -> Result<(Vec<BoundRow>, Vec<String>)> {
    let ctx = Ctx::new(scn)?;
    let mut rows = vec![ctx.deterministic(scn)?];
    let mut notes = Vec::new();
    if scn.theorem == Theorem::Auto {
        for th in Theorem::CONCRETE {
            match ctx.theorem(scn, th) {
                Ok(r) => rows.push(r),
                Err(e) => notes.push(format!("{} skipped: {e:#}", th.name())),
            }
        }
    } else {
        let th = scn.theorem;
        rows.push(ctx.theorem(scn, th).with_context(|| format!("{} is not applicable", th.name()))?);
    }
    Ok((rows, notes))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Param {
    A,
    T,
    Ell,
}

impl std::str::FromStr for Param {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "a" => Ok(Param::A),
            "T" => Ok(Param::T),
            "ell" => Ok(Param::Ell),
            _ => Err(format!("unknown sweep parameter `{s}` (expected a, T or ell)")),
        }
    }
}

/// Re-runs the analysis once per grid value of `param`; the deterministic row
/// is dropped since it does not depend on the parameter.
pub fn sweep(scn: &Scenario, param: Param, grid: &[Lit]) -> Result<(Vec<BoundRow>, Vec<String>)> {
    if grid.is_empty() {
        bail!("the sweep grid is empty");
    }
    let mut rows = Vec::new();
    let mut notes = Vec::new();
    for v in grid {
        let mut s = scn.clone();
        match param {
            Param::A => s.a = v.clone(),
            Param::T => s.t_scale = TimeScale::Value(v.clone()),
            Param::Ell => s.ell = v.clone(),
        }
        if s.theorem == Theorem::Auto {
            s.theorem = match param {
                Param::T => Theorem::Thm5,
                Param::Ell => Theorem::Thm6,
                Param::A => Theorem::Auto,
            };
        }
        let (r, n) = analyze(&s).with_context(|| format!("at {} = {v}", name(param)))?;
        rows.extend(r.into_iter().filter(|r| r.theorem != "det"));
        notes.extend(n.into_iter().map(|n| format!("{} = {v}: {n}", name(param))));
    }
    if param == Param::A {
        if let Some(best) = best_a(scn, grid)? {
            notes.push(best);
        }
    }
    Ok((rows, notes))
}

fn name(p: Param) -> &'static str {
    match p {
        Param::A => "a",
        Param::T => "T",
        Param::Ell => "ell",
    }
}

/// Grid optimum of `a` for the selected concatenation, as a note.
fn best_a(scn: &Scenario, grid: &[Lit]) -> Result<Option<String>> {
    let ctx = Ctx::new(scn)?;
    let (kind, nodes) = match scn.theorem {
        Theorem::Thm4 | Theorem::Auto => {
            (ConcatKind::Thm4 { t: scn.eval_time().get() }, ctx.nodes(EffectiveServiceCurve::plain)?)
        }
        Theorem::Thm5 => {
            let tt = ctx.t_scale(scn)?;
            (ConcatKind::TBounded, ctx.nodes(|s, e| EffectiveServiceCurve::t_bounded(s, e, tt.clone()))?)
        }
        Theorem::Thm6 => {
            let ell: Q = scn.ell.get();
            (ConcatKind::LAdaptive, ctx.nodes(|s, e| EffectiveServiceCurve::l_adaptive(s, e, ell.clone()))?)
        }
        Theorem::Thm7 => return Ok(None),
    };
    let grid: Vec<Q> = grid.iter().map(Lit::get).collect();
    let (a, res) = optimize_a(&kind, &nodes, &Objective::MinViolation, &grid).map_err(|e| anyhow!(e))?;
    Ok(Some(format!("smallest violation probability {} at a = {}", res.network.epsilon.to_f64(), a.to_f64())))
}
