//! Monte-Carlo validation of the statistical bounds for a scenario.

use anyhow::Result;
use netcalc::sim::{mc_estimate, McReport, McScenario};

use crate::scenario::{Arrivals, Scenario, TimeScale};

pub fn mc_scenario(scn: &Scenario) -> Result<McScenario> {
    let grid = scn.grid()?;
    Ok(McScenario {
        flow: scn.flow_spec()?,
        arrivals: match &scn.arrivals {
            Arrivals::Greedy => None,
            Arrivals::Model(m) => Some(m.clone()),
        },
        nodes: scn.node_models()?,
        checkpoints: grid.log_checkpoints(scn.checkpoints.max(1)),
        grid,
        a: scn.a.value,
        t_scale: match &scn.t_scale {
            TimeScale::Auto => None,
            TimeScale::Value(v) => Some(v.value),
        },
        ell: scn.ell.value,
        calibration_runs: scn.calibration_runs.unwrap_or(scn.runs).max(1),
    })
}

pub fn simulate(scn: &Scenario) -> Result<McReport> {
    let mc = mc_scenario(scn)?;
    Ok(mc_estimate(&mc, &scn.bound_ids(), scn.runs, scn.seed)?)
}
