//! Model selection over the configured pool on one shared dataset.

use std::path::PathBuf;

use bsi_core::inference::{bayes_factor, model_posteriors, Executor};
use bsi_core::likelihood::ModelShorthand;
use serde::{Deserialize, Serialize};

use super::infer::{posterior_summary, sample_problem, RunArchive};
use super::{build_problem, load_data, Context};
use crate::config::{RunConfig, SCHEMA_VERSION};
use crate::dataset::write_dataset;
use crate::error::Result;
use crate::executor::Threads;
use crate::io::{num, opt, write_json, Table};

/// One row of the selection report. Reference models are fitted to a reduced
/// dataset, so their evidence is not comparable: they get no probability and
/// no Bayes factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRow {
    pub model: ModelShorthand,
    pub n_points: usize,
    pub log_z: f64,
    pub log_z_err: f64,
    pub posterior_prob: Option<f64>,
    /// `log10(Z_best / Z_model)` against the most probable model.
    pub log10_bf_best_over_model: Option<f64>,
    pub label: Option<String>,
    pub nfe: u64,
}

pub fn run(cfg: &RunConfig, ctx: &Context) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let (data, generated) = load_data(cfg, ctx)?;
    if generated {
        let p = ctx.path("data.csv");
        write_dataset(&p, &data)?;
        out.push(p);
    }
    // Models run concurrently, each sampling serially, so results do not
    // depend on the worker count.
    let fits = Threads::new(ctx.workers).map(cfg.models.len(), |i| -> Result<RunArchive> {
        let problem = build_problem(cfg, data.clone(), cfg.models[i])?;
        let run = sample_problem(cfg, &problem, &Threads::new(1))?;
        Ok(RunArchive {
            version: SCHEMA_VERSION,
            model: problem.model(),
            n_points: problem.n_points(),
            run,
        })
    });
    let fits: Vec<RunArchive> = fits.into_iter().collect::<Result<_>>()?;

    let comparable: Vec<usize> = (0..fits.len()).filter(|&i| !fits[i].model.reference).collect();
    let lz: Vec<f64> = comparable.iter().map(|&i| fits[i].run.log_z).collect();
    let probs = model_posteriors(&lz, &vec![1.0 / lz.len().max(1) as f64; lz.len()]);
    // First maximum wins ties.
    let best = comparable
        .iter()
        .zip(&probs)
        .fold(None::<(usize, f64)>, |acc, (&i, &p)| match acc {
            Some((_, bp)) if bp >= p => acc,
            _ => Some((i, p)),
        })
        .map(|(i, _)| i);

    let rows: Vec<SelectionRow> = fits
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let prob = comparable.iter().position(|&c| c == i).map(|k| probs[k]);
            let bf = best
                .filter(|_| prob.is_some())
                .map(|b| bayes_factor(fits[b].run.log_z, f.run.log_z, 1.0, 1.0));
            SelectionRow {
                model: f.model,
                n_points: f.n_points,
                log_z: f.run.log_z,
                log_z_err: f.run.log_z_err,
                posterior_prob: prob,
                log10_bf_best_over_model: bf.map(|b| b.log10_r()),
                label: bf.map(|b| b.label.to_string()),
                nfe: f.run.nfe,
            }
        })
        .collect();

    let mut t = Table::new(&[
        "model",
        "n_points",
        "log_z",
        "log_z_err",
        "posterior_prob",
        "log10_bf_best_over_model",
        "label",
        "nfe",
    ]);
    for r in &rows {
        t.push(vec![
            r.model.to_string(),
            r.n_points.to_string(),
            num(r.log_z),
            num(r.log_z_err),
            opt(r.posterior_prob),
            opt(r.log10_bf_best_over_model),
            r.label.clone().unwrap_or_default(),
            r.nfe.to_string(),
        ]);
    }
    let p = ctx.path("selection.csv");
    t.write(&p)?;
    out.push(p);
    for f in &fits {
        let stem = f.model.to_string();
        let (pa, ps) = (ctx.path(&format!("run_{stem}.json")), ctx.path(&format!("posterior_summary_{stem}.csv")));
        write_json(&pa, f)?;
        posterior_summary(&f.run).write(&ps)?;
        out.extend([pa, ps]);
    }
    let p = ctx.path("selection.json");
    write_json(&p, &rows)?;
    out.push(p);
    Ok(out)
}
