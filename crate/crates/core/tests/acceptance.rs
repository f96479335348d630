//! Acceptance criteria 1-10. Each test prints one PASS/FAIL line and then
//! asserts, so `cargo test --test acceptance -- --nocapture` gives a summary.

mod common;

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use common::*;
use netcalc::algebra::{conv, deconv};
use netcalc::catalog::{rate_latency, token_bucket, FlowSpec};
use netcalc::det::{backlog_bound, concat_min, delay_bound, det_bounds, lemma1_check, output_envelope};
use netcalc::sim::mc::{hoeffding_radius, simulate_run};
use netcalc::sim::*;
use netcalc::stat::*;
use netcalc::trace::{backlog_of, delay_of, mod_conv, mod_conv_alt};
use netcalc::{Curve, Ext, Rational, Scalar};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const FLOAT_TOL: f64 = 1e-9;
const FORMULA_REL_TOL: f64 = 1e-12;
const MOD_CONV_TOL: f64 = 1e-9;
const GREEDY_TOL: f64 = 1e-6;
const MC_RUNS: usize = 10_000;
const MC_SEED: u64 = 20_240_601;

fn verdict(n: u32, ok: bool, detail: &str) {
    println!("criterion {n:>2}: {} {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {n} failed: {detail}");
}

fn within(start: Instant, limit: Duration) -> bool {
    start.elapsed() < limit
}

/// Largest grid delay: for each grid point `u`, the first grid point `v`
/// with `S(v) >= A*(u+)`, reported as `v - u`.
fn delay_grid_oracle(a: &Curve<Rational>, s: &Curve<Rational>) -> f64 {
    let (al, ar) = sample(a, N);
    let (sl, _) = sample(s, N);
    let mut best: f64 = 0.0;
    for u in 0..N / 2 {
        let need = al[u].max(ar[u]);
        if let Some(v) = (u..=N).find(|&v| sl[v] >= need - 1e-12) {
            best = best.max((v - u) as f64 * DELTA);
        }
    }
    best
}

#[test]
fn criterion_01_classic_deterministic_triple() {
    let start = Instant::now();
    let flow = FlowSpec::new(token_bucket(q(10.0), q(1.0)).unwrap()).unwrap();
    let s = rate_latency(q(2.0), q(3.0)).unwrap();
    let b = det_bounds(&flow, &s);
    let exact = b.backlog == Ext::Fin(q(13.0))
        && b.delay == Ext::Fin(q(8.0))
        && b.output_envelope == token_bucket(q(13.0), q(1.0)).unwrap();

    let ff = FlowSpec::new(token_bucket(10.0, 1.0).unwrap()).unwrap();
    let fb = det_bounds(&ff, &rate_latency(2.0, 3.0).unwrap());
    let floats = (fb.backlog.to_f64() - 13.0).abs() <= FLOAT_TOL
        && (fb.delay.to_f64() - 8.0).abs() <= FLOAT_TOL
        && (1..=640).all(|k| (fb.output_envelope.eval(&(k as f64 * 0.1)).to_f64() - (13.0 + k as f64 * 0.1)).abs() <= FLOAT_TOL);

    // brute-force grid oracle
    let (al, _) = sample(flow.envelope(), N);
    let (sl, _) = sample(&s, N);
    let b_oracle = (0..=N).map(|k| al[k] - sl[k]).fold(0.0, f64::max);
    let d_oracle = delay_grid_oracle(flow.envelope(), &s);
    let out = deconv_oracle(flow.envelope(), &s, N / 2);
    let env_ok = (1..=N / 2).all(|k| (out[k] - (13.0 + k as f64 * DELTA)).abs() <= 1e-9);
    let oracle = (b_oracle - 13.0).abs() <= 1e-9 && (d_oracle - 8.0).abs() <= DELTA && env_ok;
    let fast = within(start, Duration::from_secs(1));
    verdict(
        1,
        exact && floats && oracle && fast,
        &format!("b_max={} d_max={} D*={} (oracle b={b_oracle}, d={d_oracle}), {:?}", b.backlog, b.delay, b.output_envelope, start.elapsed()),
    );
}

#[test]
fn criterion_02_rate_latency_concatenation() {
    let start = Instant::now();
    let curves = [
        rate_latency(q(2.0), q(1.0)).unwrap(),
        rate_latency(q(3.0), q(2.0)).unwrap(),
        rate_latency(q(2.5), q(1.0)).unwrap(),
    ];
    let want = rate_latency(q(2.0), q(4.0)).unwrap();
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let ok = perms.iter().all(|p| {
        let c: Vec<Curve<Rational>> = p.iter().map(|&i| curves[i].clone()).collect();
        concat_min(&c).unwrap() == want
    });
    let fast = within(start, Duration::from_secs(1));
    verdict(2, ok && fast, &format!("all 6 orders give {want}, {:?}", start.elapsed()));
}

#[test]
fn criterion_03_zero_epsilon_reduction() {
    let mut rng = StdRng::seed_from_u64(3);
    let mut mismatches = 0;
    for _ in 0..100 {
        let mut env = token_bucket(rng.gen_range(0..=16) as f64 * 0.5, rng.gen_range(0..=8) as f64 * 0.25).unwrap();
        if rng.gen_bool(0.5) {
            let tb = token_bucket(rng.gen_range(0..=4) as f64 * 0.5, rng.gen_range(4..=12) as f64 * 0.25).unwrap();
            env = netcalc::algebra::min_pointwise(&env, &tb);
        }
        let flow = FlowSpec::new(env).unwrap();
        let s = random_curve(&mut rng, 5).to_f64();
        let sb = stat_bounds(&flow, &EffectiveServiceCurve::plain(s.clone(), 0.0).unwrap());
        let db = det_bounds(&flow, &s);
        // records print every f64 in shortest round-trip form, so equal text means equal bits
        let same = sb.output_envelope.to_record() == db.output_envelope.to_record()
            && sb.backlog == db.backlog
            && sb.delay == db.delay
            && sb.violation_probability == 0.0;
        mismatches += (!same) as u32;
    }
    verdict(3, mismatches == 0, &format!("{mismatches} of 100 random pairs differ"));
}

fn rel_close(x: f64, want: f64) -> bool {
    ((x - want) / want).abs() <= FORMULA_REL_TOL
}

#[test]
fn criterion_04_formula_fidelity() {
    let s = rate_latency(2.0, 1.0).unwrap();
    let plain: Vec<_> = (0..2).map(|_| EffectiveServiceCurve::plain(s.clone(), 1e-3).unwrap()).collect();
    let t4 = concat_thm4(&plain, &2.0, &20.0).unwrap().network.epsilon;
    let tb: Vec<_> = (0..2).map(|_| EffectiveServiceCurve::t_bounded(s.clone(), 1e-3, 10.0).unwrap()).collect();
    let t5 = concat_thm5(&tb, &2.0).unwrap().network.epsilon;
    let ad: Vec<_> = (0..3).map(|_| EffectiveServiceCurve::l_adaptive(s.clone(), 1e-4, 10.0).unwrap()).collect();
    let t6 = concat_thm6(&ad, &2.0).unwrap().network.epsilon;
    let one = EffectiveServiceCurve::l_adaptive(s.clone(), 1e-4, 10.0).unwrap();
    let l2 = strengthen_lemma2(&one, &5.0).unwrap().epsilon;
    let ok = rel_close(t4, 0.011) && rel_close(t5, 0.008) && rel_close(t6, 1.1e-3) && rel_close(l2, 8e-4);
    verdict(4, ok, &format!("thm4={t4} thm5={t5} thm6={t6} lemma2={l2}"));
}

#[test]
fn criterion_05_operator_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(5);
    let mut failures = Vec::new();
    for i in 0..200 {
        let (f, g) = (random_curve(&mut rng, 6), random_curve(&mut rng, 6));
        if let Err(e) = conv_matches_oracle(&f, &g) {
            failures.push(format!("pair {i} conv: {e}"));
        }
        if let Err(e) = deconv_matches_oracle(&f, &g) {
            failures.push(format!("pair {i} deconv: {e}"));
        }
        if conv(&f, &g).unwrap() != conv(&g, &f).unwrap() {
            failures.push(format!("pair {i}: conv does not commute"));
        }
        let h = random_curve(&mut rng, 6);
        let left = conv(&conv(&f, &g).unwrap(), &h).unwrap();
        let right = conv(&f, &conv(&g, &h).unwrap()).unwrap();
        if left != right {
            failures.push(format!("triple {i}: conv does not associate"));
        }
    }
    let fast = within(start, Duration::from_secs(30));
    verdict(5, failures.is_empty() && fast, &format!("{} failures, {:?} {}", failures.len(), start.elapsed(), failures.first().map_or("", |s| s)));
}

#[test]
fn criterion_06_mod_conv_two_forms() {
    let mut rng = StdRng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    let mut inf_mismatch = 0;
    for _ in 0..500 {
        let a = random_trace(&mut rng, 24.0);
        let g = random_curve(&mut rng, 5).to_f64();
        let t = rng.gen::<f64>() * 24.0;
        let t0 = t * rng.gen::<f64>();
        let b = a.eval(&t0) * rng.gen::<f64>();
        let x = mod_conv(&a, &g, &t0, &t, &b).unwrap();
        let y = mod_conv_alt(&a, &g, &t0, &t, &(a.eval(&t0) - b)).unwrap();
        match (x, y) {
            (Ext::Fin(x), Ext::Fin(y)) => worst = worst.max((x - y).abs() / x.abs().max(1.0)),
            (Ext::Inf, Ext::Inf) => {}
            _ => inf_mismatch += 1,
        }
    }
    verdict(6, worst <= MOD_CONV_TOL && inf_mismatch == 0, &format!("max relative gap {worst:e} over 500 tuples"));
}

fn tb41() -> FlowSpec {
    FlowSpec::new(token_bucket(4.0, 1.0).unwrap()).unwrap()
}

fn tandem(flow: FlowSpec, nodes: Vec<NodeModel>, arrivals: Option<ArrivalModel>, ell: f64, grid: Grid) -> McScenario {
    McScenario {
        flow,
        arrivals,
        nodes,
        checkpoints: grid.log_checkpoints(32),
        grid,
        a: 2.0,
        t_scale: None,
        ell,
        calibration_runs: MC_RUNS,
    }
}

#[test]
fn criterion_07_deterministic_soundness_on_traces() {
    let grid = Grid::new(0.25, 64.0).unwrap();
    let services = [rate_latency(2.0, 1.0).unwrap(), rate_latency(3.0, 2.0).unwrap()];
    let nodes: Vec<NodeModel> = services
        .iter()
        .enumerate()
        .map(|(i, s)| NodeModel::new(NodeKind::ExactServiceCurve(s.clone()), i as u64 + 1).unwrap())
        .collect();
    let net = concat_min(&services).unwrap();
    let flow = tb41();
    let bounds = [
        (0, 1, backlog_bound(&flow, &services[0]).to_f64(), delay_bound(&flow, &services[0]).to_f64()),
        (0, 2, backlog_bound(&flow, &net).to_f64(), delay_bound(&flow, &net).to_f64()),
    ];
    let model = ArrivalModel::OnOff { peak_rate: 4.0, mean_on: 2.0, mean_off: 1.5, mean_burst: 3.0 };
    let scn = tandem(flow.clone(), nodes, Some(model), 8.0, grid);
    let mut violations = 0;
    for run in 0..100 {
        let p = simulate_run(&scn, 7, run, 0).unwrap();
        let tr: Vec<_> = p.iter().map(|x| x.to_trace(&grid).unwrap()).collect();
        for &(i, o, bmax, dmax) in &bounds {
            for &k in &scn.checkpoints {
                let t = grid.time(k);
                let b = backlog_of(&tr[i], &tr[o], &t).unwrap();
                let d = delay_of(&tr[i], &tr[o], &t).unwrap();
                violations += (b > bmax + FLOAT_TOL) as u32 + (d > dmax + FLOAT_TOL) as u32;
            }
        }
    }
    // greedy arrivals reach the bounds
    let mut greedy = scn.clone();
    greedy.arrivals = None;
    let p = simulate_run(&greedy, 7, 0, 0).unwrap();
    let tr: Vec<_> = p.iter().map(|x| x.to_trace(&grid).unwrap()).collect();
    let mut attained = true;
    for &(i, o, bmax, dmax) in &bounds {
        let (mut b, mut d): (f64, f64) = (0.0, 0.0);
        for k in 0..=grid.n {
            b = b.max(backlog_of(&tr[i], &tr[o], &grid.time(k)).unwrap());
            d = d.max(delay_of(&tr[i], &tr[o], &grid.time(k)).unwrap());
        }
        attained &= (b - bmax).abs() <= GREEDY_TOL && (d - dmax).abs() <= GREEDY_TOL;
    }
    verdict(7, violations == 0 && attained, &format!("{violations} violations in 100 runs x 32 checkpoints, greedy attains bounds: {attained}"));
}

#[test]
fn criterion_08_lemma1_on_traces() {
    let grid = Grid::new(0.25, 32.0).unwrap();
    let s = rate_latency(2.0, 1.0).unwrap();
    let flow = tb41();
    let node = |ell: f64| NodeModel::new(NodeKind::ExactAdaptive { service: s.clone(), ell }, 1).unwrap();
    let check10 = lemma1_check(&flow, &s, &10.0).unwrap();
    let check3 = lemma1_check(&flow, &s, &3.0).unwrap();
    let model = ArrivalModel::ClippedRenewal { max_rate: 4.0, mean_epoch: 1.0 };
    let scn = tandem(flow.clone(), vec![node(10.0)], Some(model), 10.0, grid);
    let mut violations = 0;
    for seed in 0..50 {
        let p = simulate_run(&scn, seed, 0, 0).unwrap();
        let bound = conv(p[0].to_trace(&grid).unwrap().curve(), &s).unwrap();
        violations += (0..=grid.n).filter(|&k| p[1].left[k] < bound.eval(&grid.time(k)).to_f64() - FLOAT_TOL).count();
    }
    // with ell = 3 greedy arrivals break the full-range guarantee
    let short = tandem(flow, vec![node(3.0)], None, 3.0, grid);
    let p = simulate_run(&short, 0, 0, 0).unwrap();
    let bound = conv(p[0].to_trace(&grid).unwrap().curve(), &s).unwrap();
    let counter = (0..=grid.n).find(|&k| p[1].left[k] < bound.eval(&grid.time(k)).to_f64() - FLOAT_TOL);
    let detail = match counter {
        Some(k) => format!("ell=3 counterexample at t={}: D={} < (A*S)={}", grid.time(k), p[1].left[k], bound.eval(&grid.time(k))),
        None => "no counterexample for ell=3".into(),
    };
    verdict(8, check10 && !check3 && violations == 0 && counter.is_some(), &format!("ell=10: {violations} violations over 50 seeds; {detail}"));
}

fn violating_pair() -> McScenario {
    let grid = Grid::new(0.25, 64.0).unwrap();
    let kind = NodeKind::ViolatingLatencyRate {
        rate: 2.0,
        latency: 1.0,
        extra: ExtraLatency::Uniform { lo: 0.5, hi: 4.0 },
        p: 0.01,
    };
    let nodes = vec![NodeModel::new(kind.clone(), 1).unwrap(), NodeModel::new(kind, 2).unwrap()];
    let model = ArrivalModel::OnOff { peak_rate: 3.0, mean_on: 2.0, mean_off: 2.0, mean_burst: 2.0 };
    tandem(tb41(), nodes, Some(model), 10.0, grid)
}

fn crit9_report() -> &'static (McReport, Duration) {
    static REPORT: OnceLock<(McReport, Duration)> = OnceLock::new();
    REPORT.get_or_init(|| {
        let start = Instant::now();
        let rep = mc_estimate(&violating_pair(), &[BoundId::Thm4], MC_RUNS, MC_SEED).unwrap();
        (rep, start.elapsed())
    })
}

#[test]
fn criterion_09_monte_carlo_soundness() {
    let start = Instant::now();
    let (thm4, _) = crit9_report();
    let eps: Vec<f64> = thm4.calibration.iter().map(|c| c.plain).collect();
    let calibrated = eps.iter().all(|e| (0.005..=0.02).contains(e));
    let thm4_ok = thm4.rows.len() == 32 && thm4.all_pass();
    let worst = thm4.rows.iter().map(|r| r.empirical - r.analytic).fold(f64::NEG_INFINITY, f64::max);

    let grid = Grid::new(0.25, 64.0).unwrap();
    let s = rate_latency(2.0, 1.0).unwrap();
    let nodes = (1..=2)
        .map(|i| NodeModel::new(NodeKind::ExactAdaptive { service: s.clone(), ell: 10.0 }, i).unwrap())
        .collect();
    let model = ArrivalModel::OnOff { peak_rate: 3.0, mean_on: 2.0, mean_off: 2.0, mean_burst: 2.0 };
    let thm7 = mc_estimate(&tandem(tb41(), nodes, Some(model), 10.0, grid), &[BoundId::Thm7], MC_RUNS, MC_SEED).unwrap();
    let thm7_ok = thm7.all_pass() && thm7.rows.iter().all(|r| r.violations == 0);
    let elapsed = start.elapsed();
    verdict(
        9,
        calibrated && thm4_ok && thm7_ok && elapsed < Duration::from_secs(300),
        &format!(
            "per-node eps {eps:?}; thm4 max(empirical - bound) = {worst:.5} with radius {:.5}; thm7 violations {}; {elapsed:?}",
            hoeffding_radius(MC_RUNS as u64),
            thm7.rows.iter().map(|r| r.violations).sum::<u64>()
        ),
    );
}

#[test]
fn criterion_10_determinism() {
    let (first, _) = crit9_report();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let again = pool.install(|| mc_estimate(&violating_pair(), &[BoundId::Thm4], MC_RUNS, MC_SEED).unwrap());
    let same = first.to_csv() == again.to_csv();
    verdict(10, same, &format!("report of {} bytes reproduced on a 3-thread pool", first.to_csv().len()));
}

#[test]
fn output_envelope_matches_theorem_form() {
    // the deterministic output bound is used by both calculi
    let flow = FlowSpec::new(token_bucket(q(4.0), q(1.0)).unwrap()).unwrap();
    let d = output_envelope(&flow, &rate_latency(q(2.0), q(1.0)).unwrap());
    assert_eq!(d, deconv(flow.envelope(), &rate_latency(q(2.0), q(1.0)).unwrap()));
    assert_eq!(d.eval(&q(1.0)), Ext::Fin(Rational::from_int(6)));
}
