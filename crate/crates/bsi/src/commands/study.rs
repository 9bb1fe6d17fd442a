//! Synthetic identification study.

use std::path::PathBuf;

use bsi_core::study::{run_study, StudyReport};

use super::Context;
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::executor::Threads;
use crate::io::{num, opt, write_json, Table};

/// Largest fraction of failed (replicate, model) cells that still counts as
/// a completed study.
pub const MAX_FAILED_FRACTION: f64 = 0.1;

pub fn summary_table(rep: &StudyReport) -> Table {
    let mut t = Table::new(&[
        "grid",
        "n_points",
        "model",
        "log_mean_z",
        "mean_log_z",
        "posterior_prob",
        "completed",
        "failed",
        "p_gt",
        "accuracy",
    ]);
    for r in &rep.rows {
        let g = rep.grid(r.grid).expect("every row has a grid summary");
        t.push(vec![
            r.grid.to_string(),
            r.n_points.to_string(),
            r.model.to_string(),
            opt(r.log_mean_z),
            opt(r.mean_log_z),
            opt(r.posterior_prob),
            r.completed.to_string(),
            r.failed.to_string(),
            num(g.p_gt),
            num(g.accuracy),
        ]);
    }
    t
}

pub fn map_error_table(rep: &StudyReport) -> Table {
    let mut t = Table::new(&["grid", "model", "parameter", "ground_truth", "mean_map", "rel_error", "cov"]);
    for r in &rep.rows {
        for e in &r.map_errors {
            t.push(vec![
                r.grid.to_string(),
                r.model.to_string(),
                e.name.clone(),
                num(e.ground_truth),
                num(e.mean_map),
                num(e.rel_error),
                num(e.cov),
            ]);
        }
    }
    t
}

pub fn cell_table(rep: &StudyReport) -> Table {
    let mut t = Table::new(&["grid", "replicate", "model", "log_z", "log_z_err", "nfe", "map", "error"]);
    for c in &rep.cells {
        let map: Vec<String> = c.map.iter().map(|(k, v)| format!("{k}={}", num(*v))).collect();
        t.push(vec![
            c.grid.to_string(),
            c.replicate.to_string(),
            c.model.to_string(),
            opt(c.log_z),
            opt(c.log_z_err),
            c.nfe.to_string(),
            map.join(";"),
            c.error.clone().unwrap_or_default(),
        ]);
    }
    t
}

pub fn run(cfg: &RunConfig, ctx: &Context) -> Result<Vec<PathBuf>> {
    let section = cfg
        .study
        .as_ref()
        .ok_or_else(|| CliError::Config("`study` section is required".into()))?;
    let sc = cfg.study_config(section)?;
    let rep = run_study(&sc, &Threads::new(ctx.workers))?;
    let files = [
        ("study_summary.csv", summary_table(&rep)),
        ("study_map_errors.csv", map_error_table(&rep)),
        ("study_cells.csv", cell_table(&rep)),
    ];
    let mut out = Vec::new();
    for (name, t) in files {
        let p = ctx.path(name);
        t.write(&p)?;
        out.push(p);
    }
    let p = ctx.path("study_report.json");
    write_json(&p, &rep)?;
    out.push(p);
    let failed = rep.cells.iter().filter(|c| c.error.is_some()).count();
    if failed as f64 > MAX_FAILED_FRACTION * rep.cells.len() as f64 {
        return Err(CliError::Check(format!("{failed} of {} study cells failed", rep.cells.len())));
    }
    Ok(out)
}
