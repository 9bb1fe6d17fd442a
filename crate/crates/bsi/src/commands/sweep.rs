//! Peak stress against one structural parameter.

use std::path::PathBuf;

use bsi_core::beam::BeamModel;
use bsi_core::inference::{Executor, Param};
use bsi_core::kernels::SpaceTimeGrid;

use super::{data_grid, Context};
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::executor::Threads;
use crate::io::{num, Table};

/// `points` evenly spaced values on `[lo, hi]`; a single point sits at `lo`.
pub fn sweep_values(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect()
}

/// Signed value of largest magnitude; ties keep the first.
fn peak(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0, |p, x| if x.abs() > p.abs() { x } else { p })
}

pub fn run(cfg: &RunConfig, ctx: &Context) -> Result<Vec<PathBuf>> {
    let s = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("`sweep` section is required".into()))?;
    let param = Param::parse(&s.parameter).ok_or_else(|| CliError::Config(format!("cannot sweep `{}`", s.parameter)))?;
    let (lo, hi) = cfg.sweep_range(s)?;
    let sensors = match &s.sensors {
        Some(x) => x.clone(),
        None => data_grid(cfg, ctx)?.x().to_vec(),
    };
    let trucks = cfg.trucks();
    let reach = trucks
        .iter()
        .flat_map(|t| t.axle_offsets.iter().copied())
        .fold(0.0, f64::max);
    let end = cfg.geometry.total_length() + reach;
    let n_pos = (end / s.load_step).floor() as usize + 1;
    let positions = (0..n_pos).map(|k| k as f64 * s.load_step).collect();
    let grid = SpaceTimeGrid::new(sensors, positions)?;
    let beam = BeamModel::new(cfg.geometry.clone(), grid.x())?;
    let values = sweep_values(lo, hi, s.points);

    let lines = Threads::new(ctx.workers).map(values.len(), |i| {
        let mut ts = cfg.theta_s();
        match param {
            Param::Kv => ts.log10_kv = values[i],
            Param::Kr(k) => ts.log10_kr[k] = values[i],
            Param::Corr(_) => unreachable!("validated as structural"),
        }
        beam.model_response_grid(&ts, &trucks, &grid)
    });

    let mut t = Table::new(&["value", "lane", "sensor", "peak_stress"]);
    let (n_t, n_x) = (grid.n_t(), grid.n_x());
    for (v, resp) in values.iter().zip(lines) {
        let resp = resp?;
        for lane in 0..trucks.len() {
            for j in 0..n_x {
                let line: Vec<f64> = (0..n_t).map(|k| resp[lane * grid.len() + grid.index(k, j)]).collect();
                t.push(vec![num(*v), lane.to_string(), num(grid.x()[j]), num(peak(&line))]);
            }
        }
    }
    let p = ctx.path("sweep.csv");
    t.write(&p)?;
    Ok(vec![p])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_span_the_range() {
        assert_eq!(sweep_values(4.0, 10.0, 4), [4.0, 6.0, 8.0, 10.0]);
        assert_eq!(sweep_values(4.0, 10.0, 1), [4.0]);
    }

    #[test]
    fn peak_keeps_sign() {
        assert_eq!(peak(&[1.0, -3.0, 2.0]), -3.0);
        assert_eq!(peak(&[]), 0.0);
    }
}
