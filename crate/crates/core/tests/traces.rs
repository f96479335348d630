mod common;

use common::*;
use netcalc::algebra::conv;
use netcalc::catalog::{rate_latency, token_bucket, FlowSpec};
use netcalc::det::{backlog_bound, delay_bound, lemma1_check};
use netcalc::sim::mc::simulate_run;
use netcalc::sim::*;
use netcalc::trace::*;
use netcalc::Curve;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn tb41() -> FlowSpec {
    FlowSpec::new(token_bucket(4.0, 1.0).unwrap()).unwrap()
}

fn quarter(rng: &mut StdRng, hi: f64) -> f64 {
    (rng.gen::<f64>() * hi * 4.0).floor() / 4.0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn mod_conv_forms_agree(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let a = random_trace(&mut rng, 24.0);
        let g = random_curve(&mut rng, 5).to_f64();
        let t = quarter(&mut rng, 24.0) + 0.25 * rng.gen_bool(0.5) as u8 as f64 * rng.gen::<f64>();
        let t0 = t * rng.gen::<f64>();
        let b = a.eval(&t0) * rng.gen::<f64>();
        let d0 = a.eval(&t0) - b;
        let x = mod_conv(&a, &g, &t0, &t, &b).unwrap();
        let y = mod_conv_alt(&a, &g, &t0, &t, &d0).unwrap();
        prop_assert!(x.approx_eq(&y) || (x.to_f64() - y.to_f64()).abs() <= 1e-9, "{x} vs {y}");
    }

    #[test]
    fn time_shift_keeps_backlog(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let a = random_trace(&mut rng, 16.0);
        let s = rate_latency(rng.gen_range(1..=4) as f64, rng.gen_range(0..=8) as f64 * 0.25).unwrap();
        let d = Trace::new(conv(a.curve(), &s).unwrap(), 16.0).unwrap();
        let t0 = quarter(&mut rng, 15.0);
        // the shifted arrivals start at 0 like every trace, so x = 0 is excluded
        let (at, dt) = time_shift(&a, &d, &t0).unwrap();
        let x = quarter(&mut rng, 15.75 - t0) + 0.25;
        let lhs = backlog_of(&at, &dt, &x).unwrap();
        let rhs = backlog_of(&a, &d, &(t0 + x)).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-9, "t0={t0} x={x} {lhs} {rhs}");
    }
}

#[test]
fn causality_violations_are_reported() {
    let a = Trace::from_events(&[(0.0, 0.0), (4.0, 4.0)], 4.0).unwrap();
    let d = Trace::from_events(&[(0.0, 0.0), (2.0, 3.0), (4.0, 3.0)], 4.0).unwrap();
    assert!(matches!(backlog_of(&a, &d, &1.0), Err(netcalc::TraceError::Causality { .. })));
}

#[test]
fn regulated_arrivals_always_conform() {
    let grid = Grid::new(0.25, 32.0).unwrap();
    let flow = FlowSpec::new(netcalc::algebra::min_pointwise(
        &token_bucket(6.0, 1.0).unwrap(),
        &token_bucket(1.0, 3.0).unwrap(),
    ))
    .unwrap();
    let models = [
        ArrivalModel::OnOff { peak_rate: 5.0, mean_on: 1.5, mean_off: 1.0, mean_burst: 3.0 },
        ArrivalModel::ClippedRenewal { max_rate: 6.0, mean_epoch: 0.5 },
    ];
    for m in &models {
        for run in 0..100 {
            let p = gen_regulated(&flow, m, &grid, &mut stream(11, run, 0, 0)).unwrap();
            assert!(is_envelope_of(flow.envelope(), &p.to_trace(&grid).unwrap()).unwrap(), "run {run}");
        }
    }
}

#[test]
fn greedy_arrivals_attain_the_bounds() {
    let grid = Grid::new(0.25, 32.0).unwrap();
    for (sigma, rho, r, lat) in [(4.0, 1.0, 2.0, 1.0), (10.0, 1.0, 2.0, 3.0), (2.0, 0.5, 1.0, 2.5)] {
        let flow = FlowSpec::new(token_bucket(sigma, rho).unwrap()).unwrap();
        let s = rate_latency(r, lat).unwrap();
        let a = gen_greedy(&flow, &grid).unwrap();
        let node = NodeModel::new(NodeKind::ExactServiceCurve(s.clone()), 1).unwrap();
        let d = serve(&node, &a, &grid, &mut stream(0, 0, 1, 0)).unwrap();
        let (at, dt) = (a.to_trace(&grid).unwrap(), d.to_trace(&grid).unwrap());
        let mut bmax: f64 = 0.0;
        let mut dmax: f64 = 0.0;
        for k in 0..=grid.n {
            let t = grid.time(k);
            bmax = bmax.max(backlog_of(&at, &dt, &t).unwrap());
            dmax = dmax.max(delay_of(&at, &dt, &t).unwrap());
        }
        assert!((bmax - backlog_bound(&flow, &s).to_f64()).abs() < 1e-6);
        assert!((dmax - delay_bound(&flow, &s).to_f64()).abs() < 1e-6);
    }
}

fn adaptive_scenario(ell: f64, arrivals: Option<ArrivalModel>) -> McScenario {
    let grid = Grid::new(0.25, 24.0).unwrap();
    let s = rate_latency(2.0, 1.0).unwrap();
    McScenario {
        flow: tb41(),
        arrivals,
        nodes: vec![NodeModel::new(NodeKind::ExactAdaptive { service: s, ell }, 1).unwrap()],
        checkpoints: grid.log_checkpoints(32),
        grid,
        a: 1.0,
        t_scale: None,
        ell,
        calibration_runs: 1,
    }
}

#[test]
fn exact_adaptive_output_passes_check_adaptive() {
    let scn = adaptive_scenario(4.0, Some(ArrivalModel::OnOff { peak_rate: 3.0, mean_on: 1.0, mean_off: 1.0, mean_burst: 2.0 }));
    let s = rate_latency(2.0, 1.0).unwrap();
    for run in 0..3 {
        let p = simulate_run(&scn, 5, run, 0).unwrap();
        let (a, d) = (p[0].to_trace(&scn.grid).unwrap(), p[1].to_trace(&scn.grid).unwrap());
        assert!(check_adaptive(&a, &d, &s, &4.0, &0.5).unwrap());
    }
}

#[test]
fn lemma1_holds_on_traces() {
    let s = rate_latency(2.0, 1.0).unwrap();
    assert!(lemma1_check(&tb41(), &s, &10.0).unwrap());
    let scn = adaptive_scenario(10.0, Some(ArrivalModel::ClippedRenewal { max_rate: 4.0, mean_epoch: 1.0 }));
    for run in 0..20 {
        let p = simulate_run(&scn, 9, run, 0).unwrap();
        let bound = conv(p[0].to_trace(&scn.grid).unwrap().curve(), &s).unwrap();
        for k in 0..=scn.grid.n {
            assert!(p[1].left[k] >= bound.eval(&scn.grid.time(k)).to_f64() - 1e-9, "run {run} k {k}");
        }
    }
}

#[test]
fn seeds_fix_the_report_regardless_of_threads() {
    let scn = adaptive_scenario(3.0, Some(ArrivalModel::OnOff { peak_rate: 3.0, mean_on: 1.0, mean_off: 2.0, mean_burst: 1.0 }));
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| mc_estimate(&scn, &BoundId::ALL, 64, 42).unwrap().to_csv())
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one, run(3));
}

#[test]
fn event_lists_are_reproducible() {
    let grid = Grid::new(0.5, 16.0).unwrap();
    let m = ArrivalModel::ClippedRenewal { max_rate: 3.0, mean_epoch: 1.0 };
    let x = gen_regulated(&tb41(), &m, &grid, &mut stream(42, 0, 0, 0)).unwrap();
    let y = gen_regulated(&tb41(), &m, &grid, &mut stream(42, 0, 0, 0)).unwrap();
    assert_eq!(x.to_trace(&grid).unwrap().events(), y.to_trace(&grid).unwrap().events());
    let z = gen_regulated(&tb41(), &m, &grid, &mut stream(43, 0, 0, 0)).unwrap();
    assert_ne!(x, z);
}

#[test]
fn dumps_round_trip_simulated_paths() {
    let grid = Grid::new(0.25, 8.0).unwrap();
    let a = gen_greedy(&tb41(), &grid).unwrap().to_trace(&grid).unwrap();
    let back = Trace::parse_dump(&a.to_dump()).unwrap();
    assert!(back.curve().approx_eq(a.curve()));
    let _: &Curve = back.curve();
}
