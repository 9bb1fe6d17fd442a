//! Likelihood benchmark: structured path against the dense oracle over a
//! ladder of problem sizes.

use std::path::PathBuf;
use std::time::Instant;

use bsi_core::kernels::{KernelKind, SpaceTimeGrid};
use bsi_core::likelihood::{
    build_covariance_dense, choose_path, loglik, loglik_dense, ErrorStructure, Evaluation, LikelihoodPath,
    ModelShorthand, ProbModelSpec, ThetaC,
};
use bsi_core::study::{derive_seed, sample_synthetic};

use super::{model_key, stream, Context};
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::io::{num, Table};

/// Fast and dense values must agree to this before anything is timed.
pub const AGREEMENT_ABS: f64 = 1e-6;
pub const AGREEMENT_REL: f64 = 1e-8;

/// Sensor spacing and load-position spacing of benchmark grids, m.
const SENSOR_SPACING: f64 = 10.0;
const LOAD_SPACING: f64 = 0.5;

/// One benchmark problem: `n_x` sensors, `n / n_x` load positions, a smooth
/// positive model response and one draw of observations.
#[derive(Debug, Clone)]
pub struct BenchCase {
    pub grid: SpaceTimeGrid,
    pub spec: ProbModelSpec,
    pub y_model: Vec<f64>,
    pub y_obs: Vec<f64>,
}

impl BenchCase {
    pub fn new(n: usize, n_x: usize, model: ModelShorthand, theta: &ThetaC, seed: u64) -> Result<Self> {
        if n_x == 0 || n == 0 || n % n_x != 0 {
            return Err(CliError::Config(format!("size {n} is not a positive multiple of {n_x} sensors")));
        }
        let x = (0..n_x).map(|j| SENSOR_SPACING * j as f64).collect();
        let t = (0..n / n_x).map(|k| LOAD_SPACING * k as f64).collect();
        let grid = SpaceTimeGrid::new(x, t)?;
        let mut y_model = Vec::with_capacity(n);
        for &t in grid.t() {
            for j in 0..n_x {
                y_model.push(5.0 + 15.0 * (0.05 * t + 0.3 * j as f64).sin().abs());
            }
        }
        let spec = model.active_spec(theta, n_x);
        let y_obs = sample_synthetic(&spec, &grid, &y_model, seed)?;
        Ok(Self {
            grid,
            spec,
            y_model,
            y_obs,
        })
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// The dispatcher's choice; dense is allowed up to `dense_max`.
    pub fn fast(&self, dense_max: usize) -> Result<Evaluation> {
        Ok(loglik(&self.y_obs, &self.y_model, &self.spec, &self.grid, dense_max)?)
    }

    /// Dense oracle: build `Σ`, then Cholesky.
    pub fn dense(&self, cap: usize) -> Result<f64> {
        let sigma = build_covariance_dense(&self.spec, &self.grid, &self.y_model, cap)?;
        Ok(loglik_dense(&self.y_obs, &self.y_model, &sigma)?)
    }
}

/// Structured path the dispatcher must pick, or `None` when only the dense
/// oracle applies: additive models always have one; multiplicative models
/// need a Markov or independent time kernel and nonzero measurement noise.
pub fn expected_structured_path(spec: &ProbModelSpec) -> Option<LikelihoodPath> {
    let rbf_t = spec.kt == KernelKind::Rbf && spec.theta.l_corr_t > bsi_core::kernels::L_MIN;
    match spec.error {
        ErrorStructure::Additive => Some(LikelihoodPath::AdditiveEigen),
        ErrorStructure::Multiplicative if !rbf_t && spec.theta.sigma_meas > 0.0 => {
            Some(LikelihoodPath::MultiplicativeFast)
        }
        ErrorStructure::Multiplicative => None,
    }
}

/// Mean wall time of `repeats` calls, in milliseconds.
pub fn time_ms<T>(repeats: usize, mut f: impl FnMut() -> Result<T>) -> Result<f64> {
    let start = Instant::now();
    for _ in 0..repeats {
        std::hint::black_box(f()?);
    }
    Ok(start.elapsed().as_secs_f64() * 1e3 / repeats as f64)
}

pub fn agree(a: f64, b: f64) -> bool {
    (a - b).abs() <= AGREEMENT_ABS + AGREEMENT_REL * a.abs().max(b.abs())
}

pub fn run(cfg: &RunConfig, ctx: &Context) -> Result<Vec<PathBuf>> {
    let b = cfg.bench.clone().unwrap_or_default();
    let mut values = Table::new(&["n", "m", "n_x", "model", "path", "loglik", "dense_loglik", "abs_diff"]);
    let mut timing = Table::new(&["n", "model", "path", "mean_ms"]);
    for &model in &b.models {
        for &n in &b.ladder {
            let seed = derive_seed(cfg.seed, &[stream::BENCH, model_key(model), n as u64]);
            let case = BenchCase::new(n, b.sensors, model, &b.theta_c, seed)?;
            let structured = expected_structured_path(&case.spec);
            let chosen = choose_path(&case.spec, &case.grid, usize::MAX)?;
            if structured.unwrap_or(LikelihoodPath::Dense) != chosen {
                return Err(CliError::Check(format!(
                    "{model} at N = {n}: dispatcher chose {}, rules say {}",
                    chosen.as_str(),
                    structured.map_or("dense", |p| p.as_str())
                )));
            }
            let with_dense = n <= b.dense_max;
            let fast = match structured {
                Some(_) => Some(case.fast(b.dense_max)?.value),
                None => None,
            };
            let dense = if with_dense { Some(case.dense(b.dense_max)?) } else { None };
            if let (Some(f), Some(d)) = (fast, dense) {
                if !agree(f, d) {
                    return Err(CliError::Check(format!("{model} at N = {n}: fast {f} vs dense {d}")));
                }
            }
            let path = structured.map_or("dense", |p| p.as_str());
            let cell = |v: Option<f64>| v.map(num).unwrap_or_else(|| "skipped".into());
            values.push(vec![
                n.to_string(),
                (n / b.sensors).to_string(),
                b.sensors.to_string(),
                model.to_string(),
                path.into(),
                cell(fast),
                cell(dense),
                match (fast, dense) {
                    (Some(f), Some(d)) => num((f - d).abs()),
                    _ => String::new(),
                },
            ]);
            if structured.is_some() {
                let ms = time_ms(b.repeats, || case.fast(b.dense_max))?;
                timing.push(vec![n.to_string(), model.to_string(), path.into(), num(ms)]);
            }
            if with_dense {
                let ms = time_ms(b.repeats, || case.dense(b.dense_max))?;
                timing.push(vec![n.to_string(), model.to_string(), "dense".into(), num(ms)]);
            }
        }
    }
    let (pv, pt) = (ctx.path("bench_values.csv"), ctx.path("bench_timing.csv"));
    values.write(&pv)?;
    timing.write(&pt)?;
    Ok(vec![pv, pt])
}
