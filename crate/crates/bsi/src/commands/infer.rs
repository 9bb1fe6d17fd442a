//! Single-model inference and posterior prediction.

use std::path::PathBuf;

use bsi_core::inference::{
    highest_density_interval, map_estimate, nested_sample, posterior_predictive, BayesProblem, NestedRun,
};
use bsi_core::likelihood::ModelShorthand;
use bsi_core::study::derive_seed;
use serde::{Deserialize, Serialize};

use super::{build_problem, load_data, model_key, stream, Context};
use crate::config::{RunConfig, SCHEMA_VERSION};
use crate::dataset::write_dataset;
use crate::error::{CliError, Result};
use crate::executor::Threads;
use crate::io::{num, read_json, resolve, write_json, Table};

/// Credible mass of the reported highest-density intervals.
pub const HDI_MASS: f64 = 0.9;

/// JSON archive of one posterior run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunArchive {
    pub version: u32,
    pub model: ModelShorthand,
    /// Observations entering the likelihood.
    pub n_points: usize,
    pub run: NestedRun,
}

/// Per parameter: posterior mean, 90% highest-density interval and MAP.
pub fn posterior_summary(run: &NestedRun) -> Table {
    let mut t = Table::new(&["parameter", "mean", "hdi90_lower", "hdi90_upper", "map"]);
    let w = run.weights();
    let mean = run.mean();
    let map = map_estimate(run);
    for (i, name) in run.names.iter().enumerate() {
        let vals: Vec<f64> = run.samples.iter().map(|s| s.theta[i]).collect();
        let (lo, hi) = highest_density_interval(&vals, &w, HDI_MASS).unwrap_or((f64::NAN, f64::NAN));
        t.push(vec![
            name.clone(),
            num(mean[i]),
            num(lo),
            num(hi),
            map.map_or_else(String::new, |m| num(m[i])),
        ]);
    }
    t
}

pub(crate) fn sample_problem(
    cfg: &RunConfig,
    problem: &BayesProblem,
    exec: &Threads,
) -> Result<NestedRun> {
    Ok(nested_sample(
        |th| problem.loglik(th),
        problem.prior(),
        &cfg.sampler,
        derive_seed(cfg.seed, &[stream::SAMPLER, model_key(problem.model())]),
        exec,
    )?)
}

fn infer_and_write(cfg: &RunConfig, ctx: &Context, out: &mut Vec<PathBuf>) -> Result<(BayesProblem, NestedRun)> {
    let (data, generated) = load_data(cfg, ctx)?;
    if generated {
        let p = ctx.path("data.csv");
        write_dataset(&p, &data)?;
        out.push(p);
    }
    let problem = build_problem(cfg, data, cfg.models[0])?;
    let run = sample_problem(cfg, &problem, &Threads::new(ctx.workers))?;
    let archive = RunArchive {
        version: SCHEMA_VERSION,
        model: problem.model(),
        n_points: problem.n_points(),
        run,
    };
    let (pa, ps) = (ctx.path("run.json"), ctx.path("posterior_summary.csv"));
    write_json(&pa, &archive)?;
    posterior_summary(&archive.run).write(&ps)?;
    out.extend([pa, ps]);
    Ok((problem, archive.run))
}

pub fn run(cfg: &RunConfig, ctx: &Context) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    infer_and_write(cfg, ctx, &mut out)?;
    Ok(out)
}

/// Empirical quantile with linear interpolation between order statistics.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (i, f) = (pos.floor() as usize, pos - pos.floor());
    match sorted.get(i + 1) {
        Some(next) => sorted[i] + f * (next - sorted[i]),
        None => sorted[i],
    }
}

pub fn predict(cfg: &RunConfig, ctx: &Context) -> Result<Vec<PathBuf>> {
    let pc = cfg.predict.clone().unwrap_or_default();
    let mut out = Vec::new();
    let (problem, run) = match &pc.archive {
        Some(path) => {
            let archive: RunArchive = read_json(&resolve(&ctx.base, path))?;
            let (data, _) = load_data(cfg, ctx)?;
            let problem = build_problem(cfg, data, cfg.models[0])?;
            let names: Vec<String> = problem.params().iter().map(|p| p.name()).collect();
            if archive.model != problem.model() || archive.run.names != names {
                return Err(CliError::Config(format!(
                    "archive holds {} over {:?}, config describes {} over {:?}",
                    archive.model,
                    archive.run.names,
                    problem.model(),
                    names
                )));
            }
            (problem, archive.run)
        }
        None => infer_and_write(cfg, ctx, &mut out)?,
    };
    let draws = posterior_predictive(&run, &problem, pc.n_draws, derive_seed(cfg.seed, &[stream::PREDICT]))?;
    let data = problem.data();
    let g = &data.grid;
    let mut t = Table::new(&["lane", "sensor_x", "t", "y_obs", "mean", "sd", "q05", "q95"]);
    let k = draws.len() as f64;
    for (i, y) in data.y_obs.iter().enumerate() {
        let mut col: Vec<f64> = draws.iter().map(|d| d[i]).collect();
        let mean = col.iter().sum::<f64>() / k;
        let sd = if draws.len() > 1 {
            (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
        } else {
            0.0
        };
        col.sort_by(f64::total_cmp);
        let (lane, kk, j) = (i / g.len(), (i % g.len()) / g.n_x(), i % g.n_x());
        t.push(vec![
            lane.to_string(),
            num(g.x()[j]),
            num(g.t()[kk]),
            num(*y),
            num(mean),
            num(sd),
            num(quantile(&col, 0.05)),
            num(quantile(&col, 0.95)),
        ]);
    }
    let p = ctx.path("predictive.csv");
    t.write(&p)?;
    out.push(p);
    Ok(out)
}
