//! Arrival generators. Random traffic is produced by a raw model and then
//! passed through a greedy shaper for the flow's envelope, so every
//! generated path conforms to the envelope.

use rand::Rng;
use rand_distr::{Distribution, Exp};

use super::{conv_grid, Grid, GridPath, Sampled};
use crate::catalog::FlowSpec;
use crate::error::SimError;

/// Raw traffic before regulation.
#[derive(Clone, Debug, PartialEq)]
pub enum ArrivalModel {
    /// Exponential on and off periods. While on, traffic arrives at
    /// `peak_rate`; each on period starts with a burst of exponential size
    /// `mean_burst` at the next grid point (0 disables bursts).
    OnOff { peak_rate: f64, mean_on: f64, mean_off: f64, mean_burst: f64 },
    /// Exponential epochs, each with a rate drawn uniformly in
    /// `[0, max_rate]`.
    ClippedRenewal { max_rate: f64, mean_epoch: f64 },
}

impl ArrivalModel {
    fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Setup(m.to_string()));
        match *self {
            ArrivalModel::OnOff { peak_rate, mean_on, mean_off, mean_burst } => {
                if !(peak_rate >= 0.0 && mean_on > 0.0 && mean_off > 0.0 && mean_burst >= 0.0) {
                    return bad("on-off model needs peak_rate >= 0, mean_on > 0, mean_off > 0, mean_burst >= 0");
                }
            }
            ArrivalModel::ClippedRenewal { max_rate, mean_epoch } => {
                if !(max_rate >= 0.0 && mean_epoch > 0.0) {
                    return bad("renewal model needs max_rate >= 0 and mean_epoch > 0");
                }
            }
        }
        Ok(())
    }
}

fn envelope_samples(flow: &FlowSpec, grid: &Grid) -> Result<Sampled, SimError> {
    let e = flow.envelope();
    if e.infinite_from().is_some_and(|x| *x <= grid.horizon()) {
        return Err(SimError::Setup("the arrival envelope must be finite on the horizon".into()));
    }
    grid.check_aligned(e, "the arrival envelope")?;
    Ok(Sampled::of(e, grid, grid.n + 1))
}

/// The envelope itself: `A = A*` on the horizon.
pub fn gen_greedy(flow: &FlowSpec, grid: &Grid) -> Result<GridPath, SimError> {
    let s = envelope_samples(flow, grid)?;
    let mut p = GridPath { left: s.left, right: s.right };
    p.left[0] = 0.0;
    Ok(p)
}

/// A random path of the raw model, shaped by the envelope.
pub fn gen_regulated<R: Rng>(flow: &FlowSpec, model: &ArrivalModel, grid: &Grid, rng: &mut R) -> Result<GridPath, SimError> {
    model.validate()?;
    let env = envelope_samples(flow, grid)?;
    let raw = raw_path(model, grid, rng);
    Ok(conv_grid(&raw, &env))
}

/// Cumulative raw traffic at the grid points.
fn raw_path<R: Rng>(model: &ArrivalModel, grid: &Grid, rng: &mut R) -> GridPath {
    let h = grid.horizon();
    // rate changes (time, rate) and bursts (grid index, size)
    let mut changes: Vec<(f64, f64)> = Vec::new();
    let mut bursts: Vec<(usize, f64)> = Vec::new();
    match *model {
        ArrivalModel::OnOff { peak_rate, mean_on, mean_off, mean_burst } => {
            let on = Exp::new(1.0 / mean_on).expect("positive mean");
            let off = Exp::new(1.0 / mean_off).expect("positive mean");
            let mut t = 0.0;
            let mut is_on = rng.gen_bool(mean_on / (mean_on + mean_off));
            while t < h {
                if is_on {
                    changes.push((t, peak_rate));
                    if mean_burst > 0.0 {
                        let k = (t / grid.dt).ceil() as usize;
                        bursts.push((k.min(grid.n), Exp::new(1.0 / mean_burst).expect("positive").sample(rng)));
                    }
                    t += on.sample(rng);
                } else {
                    changes.push((t, 0.0));
                    t += off.sample(rng);
                }
                is_on = !is_on;
            }
        }
        ArrivalModel::ClippedRenewal { max_rate, mean_epoch } => {
            let epoch = Exp::new(1.0 / mean_epoch).expect("positive mean");
            let mut t = 0.0;
            while t < h {
                changes.push((t, rng.gen::<f64>() * max_rate));
                t += epoch.sample(rng);
            }
        }
    }
    let mut p = GridPath::zero(grid);
    let mut acc = 0.0;
    let mut c = 0;
    for k in 1..=grid.n {
        let (lo, hi) = (grid.time(k - 1), grid.time(k));
        let mut t = lo;
        while t < hi {
            while c + 1 < changes.len() && changes[c + 1].0 <= t {
                c += 1;
            }
            let next = changes.get(c + 1).map_or(hi, |x| x.0.min(hi));
            acc += changes[c].1 * (next - t);
            t = next;
        }
        p.left[k] = acc;
        p.right[k] = acc;
    }
    // a burst at index k lifts everything after k
    let mut lift = vec![0.0; grid.n + 1];
    for (k, b) in bursts {
        lift[k] += b;
    }
    let mut total = 0.0;
    for k in 0..=grid.n {
        p.left[k] += total;
        total += lift[k];
        p.right[k] += total;
    }
    p
}
