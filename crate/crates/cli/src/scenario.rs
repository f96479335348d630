//! Scenario files: `key = value` lines, `#` comments, and one `[node]`
//! block per hop in path order.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use netcalc::catalog::{parse_curve, FlowSpec};
use netcalc::sim::{ArrivalModel, ExtraLatency, NodeKind, NodeModel};
use netcalc::{Curve, Scalar};

/// A number kept with its source text so rational backends parse it exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct Lit {
    pub text: String,
    pub value: f64,
}

impl Lit {
    pub fn parse(s: &str) -> Option<Lit> {
        let text = s.trim().to_string();
        let value = <f64 as Scalar>::parse_literal(&text)?;
        Some(Lit { text, value })
    }

    pub fn from_f64(v: f64) -> Lit {
        Lit { text: format!("{v}"), value: v }
    }

    pub fn get<T: Scalar>(&self) -> T {
        T::parse_literal(&self.text).unwrap_or_else(|| T::from_f64(self.value))
    }
}

impl fmt::Display for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Theorem {
    Thm4,
    Thm5,
    Thm6,
    Thm7,
    Auto,
}

impl Theorem {
    pub const CONCRETE: [Theorem; 4] = [Theorem::Thm4, Theorem::Thm5, Theorem::Thm6, Theorem::Thm7];

    pub fn name(self) -> &'static str {
        match self {
            Theorem::Thm4 => "thm4",
            Theorem::Thm5 => "thm5",
            Theorem::Thm6 => "thm6",
            Theorem::Thm7 => "thm7",
            Theorem::Auto => "auto",
        }
    }
}

impl FromStr for Theorem {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "thm4" => Ok(Theorem::Thm4),
            "thm5" => Ok(Theorem::Thm5),
            "thm6" => Ok(Theorem::Thm6),
            "thm7" => Ok(Theorem::Thm7),
            "auto" => Ok(Theorem::Auto),
            _ => Err(format!("unknown theorem `{s}` (expected thm4, thm5, thm6, thm7 or auto)")),
        }
    }
}

/// Time scale for T-bounded analysis.
#[derive(Clone, Debug, PartialEq)]
pub enum TimeScale {
    Auto,
    Value(Lit),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Arrivals {
    Greedy,
    Model(ArrivalModel),
}

/// How a node behaves in simulation.
#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Exact,
    Adaptive,
    Violating { rate: f64, latency: f64, extra: ExtraLatency, p: f64 },
    Cross { rate: f64, cross_rate: f64, mean_period: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub service: String,
    pub epsilon: Lit,
    pub model: Model,
    pub model_text: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub flow: String,
    pub theorem: Theorem,
    pub a: Lit,
    pub a_grid: Vec<Lit>,
    pub t_scale: TimeScale,
    pub ell: Lit,
    /// Evaluation time for the time-dependent violation probability.
    pub t: Option<Lit>,
    pub horizon: Lit,
    pub dt: Lit,
    pub checkpoints: usize,
    pub runs: usize,
    pub calibration_runs: Option<usize>,
    pub seed: u64,
    pub arrivals: Arrivals,
    pub arrivals_text: String,
    pub bounds: Option<String>,
    pub nodes: Vec<Node>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParseError {
    pub line: usize,
    pub msg: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "{}", self.msg)
        } else {
            write!(f, "line {}: {}", self.line, self.msg)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParseErrors(pub Vec<ParseError>);

impl fmt::Display for ParseErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ParseErrors {}

/// Splits `name(a, b(c, d))` into the name and its top-level arguments.
fn call(s: &str) -> Option<(&str, Vec<&str>)> {
    let s = s.trim();
    let Some(open) = s.find('(') else {
        return Some((s, Vec::new()));
    };
    let inner = s[open + 1..].strip_suffix(')')?;
    let mut args = Vec::new();
    let (mut depth, mut start) = (0i32, 0);
    for (i, ch) in inner.char_indices() {
        match ch {
            '(' | '[' => depth += 1,
            ')' | ']' => depth -= 1,
            ',' if depth == 0 => {
                args.push(inner[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
        if depth < 0 {
            return None;
        }
    }
    if !inner.trim().is_empty() {
        args.push(inner[start..].trim());
    }
    Some((s[..open].trim(), args))
}

fn nums(args: &[&str], n: usize, what: &str) -> Result<Vec<f64>, String> {
    if args.len() != n {
        return Err(format!("`{what}` takes {n} argument(s), got {}", args.len()));
    }
    args.iter()
        .map(|a| Lit::parse(a).map(|l| l.value).ok_or_else(|| format!("bad number `{a}` in `{what}`")))
        .collect()
}

fn parse_extra(s: &str) -> Result<ExtraLatency, String> {
    let (name, args) = call(s).ok_or_else(|| format!("malformed `{s}`"))?;
    match name {
        "const" => Ok(ExtraLatency::Const(nums(&args, 1, name)?[0])),
        "uniform" => {
            let v = nums(&args, 2, name)?;
            Ok(ExtraLatency::Uniform { lo: v[0], hi: v[1] })
        }
        "exp" => Ok(ExtraLatency::Exp { mean: nums(&args, 1, name)?[0] }),
        _ => Err(format!("unknown latency distribution `{name}` (expected const, uniform or exp)")),
    }
}

pub fn parse_model(s: &str) -> Result<Model, String> {
    let (name, args) = call(s).ok_or_else(|| format!("malformed model `{s}`"))?;
    match name {
        "exact" if args.is_empty() => Ok(Model::Exact),
        "adaptive" if args.is_empty() => Ok(Model::Adaptive),
        "violating" => {
            if args.len() != 4 {
                return Err(format!("`violating` takes 4 arguments (rate, latency, extra, p), got {}", args.len()));
            }
            let v = nums(&[args[0], args[1], args[3]], 3, name)?;
            let extra = parse_extra(args[2])?;
            Ok(Model::Violating { rate: v[0], latency: v[1], extra, p: v[2] })
        }
        "cross" => {
            let v = nums(&args, 3, name)?;
            Ok(Model::Cross { rate: v[0], cross_rate: v[1], mean_period: v[2] })
        }
        _ => Err(format!("unknown node model `{s}` (expected exact, adaptive, violating(..) or cross(..))")),
    }
}

pub fn parse_arrivals(s: &str) -> Result<Arrivals, String> {
    let (name, args) = call(s).ok_or_else(|| format!("malformed arrivals `{s}`"))?;
    match name {
        "greedy" if args.is_empty() => Ok(Arrivals::Greedy),
        "onoff" => {
            let v = nums(&args, 4, name)?;
            Ok(Arrivals::Model(ArrivalModel::OnOff { peak_rate: v[0], mean_on: v[1], mean_off: v[2], mean_burst: v[3] }))
        }
        "renewal" => {
            let v = nums(&args, 2, name)?;
            Ok(Arrivals::Model(ArrivalModel::ClippedRenewal { max_rate: v[0], mean_epoch: v[1] }))
        }
        _ => Err(format!("unknown arrivals `{s}` (expected greedy, onoff(..) or renewal(..))")),
    }
}

/// Nominal service curve implied by a simulation model, if any.
fn model_service(m: &Model) -> Option<String> {
    match m {
        Model::Violating { rate, latency, .. } => Some(format!("rl({rate},{latency})")),
        Model::Cross { rate, cross_rate, .. } => Some(format!("rl({},0)", rate - cross_rate)),
        _ => None,
    }
}

#[derive(Default)]
struct RawNode {
    line: usize,
    service: Option<(usize, String)>,
    epsilon: Option<(usize, String)>,
    model: Option<(usize, String)>,
}

const TOP_KEYS: [&str; 17] = [
    "name", "flow", "theorem", "a", "a_grid", "T", "ell", "t", "horizon", "dt", "checkpoints", "runs",
    "calibration_runs", "seed", "arrivals", "bounds", "format",
];

struct Collector {
    errors: Vec<ParseError>,
}

impl Collector {
    fn err(&mut self, line: usize, msg: impl Into<String>) {
        self.errors.push(ParseError { line, msg: msg.into() });
    }

    fn lit(&mut self, entry: Option<&(usize, String)>, key: &str, default: &str, positive: bool) -> Lit {
        let (line, text) = match entry {
            Some((l, t)) => (*l, t.as_str()),
            None => (0, default),
        };
        match Lit::parse(text) {
            Some(l) if positive && l.value <= 0.0 => {
                self.err(line, format!("`{key}` must be > 0, got {text}"));
                l
            }
            Some(l) => l,
            None => {
                self.err(line, format!("`{key}`: expected a number, got `{text}`"));
                Lit::from_f64(1.0)
            }
        }
    }

    fn count<N: FromStr>(&mut self, entry: Option<&(usize, String)>, key: &str, default: N) -> N {
        match entry {
            None => default,
            Some((line, text)) => text.parse().unwrap_or_else(|_| {
                self.err(*line, format!("`{key}`: expected a non-negative integer, got `{text}`"));
                default
            }),
        }
    }
}

impl Scenario {
    pub fn load(path: &Path) -> anyhow::Result<Scenario> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("cannot read scenario {}: {e}", path.display()))?;
        Scenario::parse(&text).map_err(|e| anyhow::anyhow!("{}:\n{e}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Scenario, ParseErrors> {
        let mut c = Collector { errors: Vec::new() };
        let mut top: Vec<(&str, (usize, String))> = Vec::new();
        let mut nodes: Vec<RawNode> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            if body.starts_with('[') {
                if body == "[node]" {
                    nodes.push(RawNode { line, ..RawNode::default() });
                } else {
                    c.err(line, format!("unknown section `{body}` (only [node] is allowed)"));
                }
                continue;
            }
            let Some((key, value)) = body.split_once('=') else {
                c.err(line, format!("expected `key = value`, got `{body}`"));
                continue;
            };
            let (key, value) = (key.trim(), value.trim().to_string());
            if let Some(node) = nodes.last_mut() {
                let slot = match key {
                    "service" => &mut node.service,
                    "epsilon" => &mut node.epsilon,
                    "model" => &mut node.model,
                    _ => {
                        c.err(line, format!("unknown node key `{key}` (expected service, epsilon or model)"));
                        continue;
                    }
                };
                if slot.is_some() {
                    c.err(line, format!("duplicate node key `{key}`"));
                }
                *slot = Some((line, value));
            } else if let Some(k) = TOP_KEYS.iter().find(|k| **k == key) {
                if top.iter().any(|(t, _)| t == k) {
                    c.err(line, format!("duplicate key `{key}`"));
                }
                top.push((k, (line, value)));
            } else {
                c.err(line, format!("unknown key `{key}`"));
            }
        }
        let get = |k: &str| top.iter().rev().find(|(t, _)| *t == k).map(|(_, v)| v);

        let flow = match get("flow") {
            None => {
                c.err(0, "missing required key `flow`");
                String::new()
            }
            Some((line, expr)) => {
                if let Err(e) = parse_curve::<f64>(expr).map_err(|e| e.to_string()).and_then(|cv| {
                    FlowSpec::new(cv).map(|_| ()).map_err(|e| e.to_string())
                }) {
                    c.err(*line, format!("`flow`: {e}"));
                }
                expr.clone()
            }
        };
        let theorem = match get("theorem") {
            None => Theorem::Auto,
            Some((line, v)) => v.parse().unwrap_or_else(|e: String| {
                c.err(*line, format!("`theorem`: {e}"));
                Theorem::Auto
            }),
        };
        let a = c.lit(get("a"), "a", "1", true);
        let a_grid = match get("a_grid") {
            None => Vec::new(),
            Some((line, v)) => {
                let items: Vec<&str> = v.split(',').map(str::trim).filter(|x| !x.is_empty()).collect();
                if items.is_empty() {
                    c.err(*line, "`a_grid` is empty");
                }
                items.iter().map(|x| c.lit(Some(&(*line, x.to_string())), "a_grid", "1", true)).collect()
            }
        };
        let t_scale = match get("T") {
            Some((_, v)) if v == "auto" => TimeScale::Auto,
            None => TimeScale::Auto,
            Some(e) => {
                let l = c.lit(Some(e), "T", "0", false);
                if l.value < 0.0 {
                    c.err(e.0, format!("`T` must be >= 0, got {}", e.1));
                }
                TimeScale::Value(l)
            }
        };
        let ell = c.lit(get("ell"), "ell", "10", true);
        let t = get("t").map(|e| c.lit(Some(e), "t", "0", false));
        let horizon = c.lit(get("horizon"), "horizon", "64", true);
        let dt = c.lit(get("dt"), "dt", "0.25", true);
        if horizon.value > 0.0 && dt.value > 0.0 {
            if let Err(e) = netcalc::sim::Grid::new(dt.value, horizon.value) {
                c.err(get("dt").or(get("horizon")).map_or(0, |e| e.0), e.to_string());
            }
        }
        let checkpoints = c.count(get("checkpoints"), "checkpoints", 32usize);
        let runs = c.count(get("runs"), "runs", 1000usize);
        let calibration_runs = get("calibration_runs").map(|e| c.count(Some(e), "calibration_runs", 1000usize));
        let seed = c.count(get("seed"), "seed", 1u64);
        let (arrivals, arrivals_text) = match get("arrivals") {
            None => (Arrivals::Greedy, "greedy".to_string()),
            Some((line, v)) => match parse_arrivals(v) {
                Ok(x) => (x, v.clone()),
                Err(e) => {
                    c.err(*line, format!("`arrivals`: {e}"));
                    (Arrivals::Greedy, v.clone())
                }
            },
        };
        let bounds = get("bounds").map(|(line, v)| {
            for b in v.split(',').map(str::trim).filter(|b| *b != "all") {
                if b.parse::<netcalc::sim::BoundId>().is_err() {
                    c.err(*line, format!("`bounds`: unknown bound `{b}`"));
                }
            }
            v.clone()
        });
        if let Some((line, v)) = get("format") {
            if v != "csv" {
                c.err(*line, format!("`format`: only csv is supported, got `{v}`"));
            }
        }

        if nodes.is_empty() {
            c.err(0, "at least one [node] block is required");
        }
        let nodes: Vec<Node> = nodes.iter().map(|n| c.node(n)).collect();

        if !c.errors.is_empty() {
            return Err(ParseErrors(c.errors));
        }
        Ok(Scenario {
            name: get("name").map_or_else(|| "scenario".to_string(), |e| e.1.clone()),
            flow,
            theorem,
            a,
            a_grid,
            t_scale,
            ell,
            t,
            horizon,
            dt,
            checkpoints,
            runs,
            calibration_runs,
            seed,
            arrivals,
            arrivals_text,
            bounds,
            nodes,
        })
    }
}

impl Collector {
    fn node(&mut self, n: &RawNode) -> Node {
        let (model, model_text) = match &n.model {
            None => (Model::Exact, "exact".to_string()),
            Some((line, v)) => match parse_model(v) {
                Ok(m) => (m, v.clone()),
                Err(e) => {
                    self.err(*line, format!("`model`: {e}"));
                    (Model::Exact, v.clone())
                }
            },
        };
        let service = match (&n.service, model_service(&model)) {
            (Some((line, expr)), _) => {
                if let Err(e) = parse_curve::<f64>(expr) {
                    self.err(*line, format!("`service`: {e}"));
                }
                expr.clone()
            }
            (None, Some(expr)) => expr,
            (None, None) => {
                self.err(n.line, "node is missing `service`");
                String::new()
            }
        };
        let epsilon = match &n.epsilon {
            None => Lit::from_f64(0.0),
            Some((line, v)) => match Lit::parse(v) {
                Some(l) if (0.0..=1.0).contains(&l.value) => l,
                Some(_) => {
                    self.err(*line, format!("`epsilon` must lie in [0, 1], got {v}"));
                    Lit::from_f64(0.0)
                }
                None => {
                    self.err(*line, format!("`epsilon`: expected a number, got `{v}`"));
                    Lit::from_f64(0.0)
                }
            },
        };
        Node { service, epsilon, model, model_text }
    }
}

impl Scenario {
    /// Serialises back to the file format; `parse(to_text())` is the identity.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: &dyn fmt::Display| out.push_str(&format!("{k} = {v}\n"));
        kv("name", &self.name);
        kv("flow", &self.flow);
        kv("theorem", &self.theorem.name());
        kv("a", &self.a);
        if !self.a_grid.is_empty() {
            let g: Vec<String> = self.a_grid.iter().map(|x| x.text.clone()).collect();
            kv("a_grid", &g.join(", "));
        }
        match &self.t_scale {
            TimeScale::Auto => kv("T", &"auto"),
            TimeScale::Value(v) => kv("T", v),
        }
        kv("ell", &self.ell);
        if let Some(t) = &self.t {
            kv("t", t);
        }
        kv("horizon", &self.horizon);
        kv("dt", &self.dt);
        kv("checkpoints", &self.checkpoints);
        kv("runs", &self.runs);
        if let Some(c) = self.calibration_runs {
            kv("calibration_runs", &c);
        }
        kv("seed", &self.seed);
        kv("arrivals", &self.arrivals_text);
        if let Some(b) = &self.bounds {
            kv("bounds", b);
        }
        for n in &self.nodes {
            out.push_str(&format!("\n[node]\nservice = {}\nepsilon = {}\nmodel = {}\n", n.service, n.epsilon, n.model_text));
        }
        out
    }

    pub fn flow_spec<T: Scalar>(&self) -> anyhow::Result<FlowSpec<T>> {
        Ok(FlowSpec::new(parse_curve(&self.flow)?)?)
    }

    pub fn services<T: Scalar>(&self) -> anyhow::Result<Vec<Curve<T>>> {
        self.nodes.iter().map(|n| Ok(parse_curve(&n.service)?)).collect()
    }

    /// Evaluation time for the plain-curve concatenation.
    pub fn eval_time(&self) -> &Lit {
        self.t.as_ref().unwrap_or(&self.horizon)
    }

    pub fn grid(&self) -> anyhow::Result<netcalc::sim::Grid> {
        Ok(netcalc::sim::Grid::new(self.dt.value, self.horizon.value)?)
    }

    /// Simulation models, one per node with its own random stream.
    pub fn node_models(&self) -> anyhow::Result<Vec<NodeModel>> {
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let kind = match &n.model {
                    Model::Exact => NodeKind::ExactServiceCurve(parse_curve(&n.service)?),
                    Model::Adaptive => NodeKind::ExactAdaptive { service: parse_curve(&n.service)?, ell: self.ell.value },
                    Model::Violating { rate, latency, extra, p } => {
                        NodeKind::ViolatingLatencyRate { rate: *rate, latency: *latency, extra: extra.clone(), p: *p }
                    }
                    Model::Cross { rate, cross_rate, mean_period } => NodeKind::ConstantRateWithCrossTraffic {
                        rate: *rate,
                        cross_rate: *cross_rate,
                        mean_period: *mean_period,
                    },
                };
                Ok(NodeModel::new(kind, i as u64 + 1)?)
            })
            .collect()
    }

    pub fn bound_ids(&self) -> Vec<netcalc::sim::BoundId> {
        use netcalc::sim::BoundId;
        match self.bounds.as_deref() {
            None | Some("all") => BoundId::ALL.to_vec(),
            Some(list) => list.split(',').filter_map(|b| b.trim().parse().ok()).collect(),
        }
    }
}
