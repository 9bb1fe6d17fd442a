//! Synthetic identification study: noisy data drawn from a ground-truth
//! model on refining sensor grids, inference under every pool model, and
//! aggregate evidence and MAP accuracy.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::beam::{BeamGeometry, BeamModel, ThetaS, TruckLoad};
use crate::error::{Error, Result};
use crate::inference::{
    map_estimate, model_posteriors, nested_sample, BayesProblem, Dataset, Executor, PriorBound, SamplerConfig, Serial,
};
use crate::kernels::SpaceTimeGrid;
use crate::likelihood::{
    correlation_cholesky_factors, kron_lower_apply, ErrorStructure, ModelShorthand, ProbModelSpec, ThetaC,
};

/// Diagonal jitter for Cholesky factors of correlation matrices.
pub const SAMPLING_JITTER: f64 = 1e-10;

/// Sensors at `k·L_span/(n+1)` inside every span; `n_t` front-axle
/// positions at `k·L/(n_t+1)` along the bridge.
pub fn make_sensor_grid(n_per_span: usize, n_t: usize, geometry: &BeamGeometry) -> Result<SpaceTimeGrid> {
    if n_per_span == 0 || n_t == 0 {
        return Err(Error::Config("grid needs at least one sensor per span and one load position".into()));
    }
    geometry.validate()?;
    let mut x = Vec::with_capacity(n_per_span * geometry.span_lengths.len());
    for s in 0..geometry.span_lengths.len() {
        let (a, b) = geometry.span_bounds(s);
        for k in 1..=n_per_span {
            x.push(a + (b - a) * k as f64 / (n_per_span + 1) as f64);
        }
    }
    let total = geometry.total_length();
    let t = (1..=n_t).map(|k| total * k as f64 / (n_t + 1) as f64).collect();
    SpaceTimeGrid::new(x, t)
}

/// `y_model` plus one draw of the spec's Gaussian error, lane by lane.
/// Uses the Kronecker factorization `(L_t ⊗ L_x) z` of the correlation.
pub fn add_noise<R: Rng>(spec: &ProbModelSpec, grid: &SpaceTimeGrid, y_model: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    spec.validate()?;
    let n = grid.len();
    if y_model.is_empty() || y_model.len() % n != 0 {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y_model.len(),
        });
    }
    let th = &spec.theta;
    let amp = match spec.error {
        ErrorStructure::Multiplicative => th.cv,
        ErrorStructure::Additive => th.sigma_model,
    };
    let factors = if amp > 0.0 {
        Some(correlation_cholesky_factors(spec, grid, SAMPLING_JITTER)?)
    } else {
        None
    };
    let mut out = Vec::with_capacity(y_model.len());
    for block in y_model.chunks(n) {
        let corr = match &factors {
            Some((lt, lx)) => {
                let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                kron_lower_apply(lt, lx, &z)?
            }
            None => vec![0.0; n],
        };
        for (y, c) in block.iter().zip(corr) {
            let model_err = match spec.error {
                ErrorStructure::Multiplicative => amp * y * c,
                ErrorStructure::Additive => amp * c,
            };
            let e: f64 = rng.sample(StandardNormal);
            out.push(y + model_err + th.sigma_meas * e);
        }
    }
    Ok(out)
}

/// Seeded synthetic observations; see [`add_noise`].
pub fn sample_synthetic(spec: &ProbModelSpec, grid: &SpaceTimeGrid, y_model: &[f64], seed: u64) -> Result<Vec<f64>> {
    add_noise(spec, grid, y_model, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Mixes `parts` into `base` (splitmix64 finalizer per part).
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mut h = base;
    for p in parts {
        h ^= p.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(h << 6).wrapping_add(h >> 2);
        h = h.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = h;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        h = z ^ (z >> 31);
    }
    h
}

/// Ground-truth correlation parameters: ~0.1 COV, 1 MPa model error,
/// 0.2 MPa measurement noise, 20 m / 30 m lengthscales.
pub fn default_ground_truth() -> ThetaC {
    ThetaC {
        cv: 0.1,
        sigma_model: 1.0,
        sigma_meas: 0.2,
        l_corr_t: 20.0,
        l_corr_x: 30.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    /// Sensors per span for each grid; each grid uses `spans × n` load
    /// positions.
    pub grids: Vec<usize>,
    pub ground_truth: ModelShorthand,
    #[serde(default = "default_ground_truth")]
    pub theta_c: ThetaC,
    /// Structural parameters, fixed during inference.
    pub theta_s: ThetaS,
    pub pool: Vec<ModelShorthand>,
    pub replicates: usize,
    pub seed: u64,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub geometry: BeamGeometry,
    /// One truck per lane; defaults to the standard truck over each girder.
    #[serde(default)]
    pub trucks: Option<Vec<TruckLoad>>,
    #[serde(default)]
    pub priors: Vec<PriorBound>,
}

impl StudyConfig {
    pub fn new(ground_truth: ModelShorthand, pool: Vec<ModelShorthand>, grids: Vec<usize>, replicates: usize) -> Self {
        let geometry = BeamGeometry::default();
        Self {
            grids,
            ground_truth,
            theta_c: default_ground_truth(),
            theta_s: ThetaS::midpoint(geometry.spring_supports.len()),
            pool,
            replicates,
            seed: 0,
            sampler: SamplerConfig::default(),
            geometry,
            trucks: None,
            priors: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        if self.pool.is_empty() {
            return Err(Error::Config("model pool is empty".into()));
        }
        if !self.pool.contains(&self.ground_truth) {
            return Err(Error::Config(format!("ground truth {} is not in the pool", self.ground_truth)));
        }
        if self.ground_truth.reference {
            return Err(Error::Config("a reference model cannot generate data".into()));
        }
        if self.grids.is_empty() || self.grids.contains(&0) {
            return Err(Error::Config("grids must be nonempty and positive".into()));
        }
        self.geometry.validate()?;
        for t in self.trucks() {
            t.validate()?;
        }
        self.model_spec(1)?.validate()
    }

    pub fn trucks(&self) -> Vec<TruckLoad> {
        self.trucks.clone().unwrap_or_else(|| TruckLoad::standard_pair(&self.geometry))
    }

    /// Ground-truth spec with parameters outside the model's active set
    /// zeroed.
    pub fn model_spec(&self, n_x: usize) -> Result<ProbModelSpec> {
        let spec = self.ground_truth.active_spec(&self.theta_c, n_x);
        spec.validate()?;
        Ok(spec)
    }

    pub fn n_t(&self, n_per_span: usize) -> usize {
        self.geometry.span_lengths.len() * n_per_span
    }
}

/// Outcome of inferring one pool model on one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub grid: usize,
    pub replicate: usize,
    pub model: ModelShorthand,
    pub log_z: Option<f64>,
    pub log_z_err: Option<f64>,
    pub map: Vec<(String, f64)>,
    pub nfe: u64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamError {
    pub name: String,
    pub ground_truth: f64,
    pub mean_map: f64,
    /// `|mean MAP − truth| / |truth|`.
    pub rel_error: f64,
    /// Standard deviation over mean of the MAP estimates.
    pub cov: f64,
}

/// One row per (grid, model).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridModelSummary {
    pub grid: usize,
    pub n_points: usize,
    pub model: ModelShorthand,
    /// `ln mean_r Z_r`, the log of the mean evidence.
    pub log_mean_z: Option<f64>,
    /// `mean_r ln Z_r`.
    pub mean_log_z: Option<f64>,
    /// Posterior probability from the mean evidences (non-reference models).
    pub posterior_prob: Option<f64>,
    pub completed: usize,
    pub failed: usize,
    /// MAP accuracy per parameter, for the ground-truth model only.
    pub map_errors: Vec<ParamError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub grid: usize,
    pub n_points: usize,
    /// Posterior probability of the ground truth from the mean evidences.
    pub p_gt: f64,
    /// Fraction of replicates where the ground truth attains the largest
    /// evidence among non-reference models.
    pub accuracy: f64,
    pub incomplete: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub config: StudyConfig,
    pub rows: Vec<GridModelSummary>,
    pub grids: Vec<GridSummary>,
    pub cells: Vec<CellResult>,
    pub workers: usize,
}

impl StudyReport {
    pub fn grid(&self, n: usize) -> Option<&GridSummary> {
        self.grids.iter().find(|g| g.grid == n)
    }

    pub fn row(&self, n: usize, model: ModelShorthand) -> Option<&GridModelSummary> {
        self.rows.iter().find(|r| r.grid == n && r.model == model)
    }
}

fn log_mean_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + (v.iter().map(|x| (x - m).exp()).sum::<f64>() / v.len() as f64).ln()
}

/// Runs every (grid, replicate, model) cell on `exec`; each cell samples
/// serially, so results do not depend on the worker count.
pub fn run_study<E: Executor>(cfg: &StudyConfig, exec: &E) -> Result<StudyReport> {
    cfg.validate()?;
    let trucks = cfg.trucks();
    let mut cells = Vec::new();
    let mut n_points = Vec::new();
    for (gi, &n) in cfg.grids.iter().enumerate() {
        let grid = make_sensor_grid(n, cfg.n_t(n), &cfg.geometry)?;
        let beam = BeamModel::new(cfg.geometry.clone(), grid.x())?;
        let y_model = beam.model_response_grid(&cfg.theta_s, &trucks, &grid)?;
        let spec = cfg.model_spec(grid.n_x())?;
        n_points.push(y_model.len());
        let datasets: Vec<Dataset> = (0..cfg.replicates)
            .map(|r| {
                let y = sample_synthetic(&spec, &grid, &y_model, derive_seed(cfg.seed, &[1, gi as u64, r as u64]))?;
                Dataset::new(grid.clone(), y)
            })
            .collect::<Result<_>>()?;
        let jobs: Vec<(usize, usize)> = (0..cfg.replicates)
            .flat_map(|r| (0..cfg.pool.len()).map(move |m| (r, m)))
            .collect();
        let results = exec.map(jobs.len(), |j| {
            let (r, m) = jobs[j];
            let model = cfg.pool[m];
            let seed = derive_seed(cfg.seed, &[2, gi as u64, r as u64, m as u64]);
            let run = BayesProblem::new(
                model,
                beam.clone(),
                trucks.clone(),
                datasets[r].clone(),
                cfg.theta_s.clone(),
                &[],
                &cfg.priors,
            )
            .and_then(|p| {
                let run = nested_sample(|th| p.loglik(th), p.prior(), &cfg.sampler, seed, &Serial)?;
                Ok((p, run))
            });
            match run {
                Ok((_, run)) => CellResult {
                    grid: n,
                    replicate: r,
                    model,
                    log_z: Some(run.log_z),
                    log_z_err: Some(run.log_z_err),
                    map: map_estimate(&run)
                        .map(|t| run.names.iter().cloned().zip(t.iter().cloned()).collect())
                        .unwrap_or_default(),
                    nfe: run.nfe,
                    error: None,
                },
                Err(e) => CellResult {
                    grid: n,
                    replicate: r,
                    model,
                    log_z: None,
                    log_z_err: None,
                    map: Vec::new(),
                    nfe: 0,
                    error: Some(e.to_string()),
                },
            }
        });
        cells.extend(results);
    }
    let (rows, grids) = summarize(cfg, &cells, &n_points);
    Ok(StudyReport {
        config: cfg.clone(),
        rows,
        grids,
        cells,
        workers: exec.workers(),
    })
}

fn summarize(cfg: &StudyConfig, cells: &[CellResult], n_points: &[usize]) -> (Vec<GridModelSummary>, Vec<GridSummary>) {
    let mut rows = Vec::new();
    let mut grids = Vec::new();
    let gt = cfg.ground_truth;
    for (gi, &n) in cfg.grids.iter().enumerate() {
        let in_grid = |m: ModelShorthand| cells.iter().filter(move |c| c.grid == n && c.model == m);
        let mut grid_rows: Vec<GridModelSummary> = cfg
            .pool
            .iter()
            .map(|&model| {
                let zs: Vec<f64> = in_grid(model).filter_map(|c| c.log_z).collect();
                let failed = in_grid(model).filter(|c| c.log_z.is_none()).count();
                let map_errors = if model == gt {
                    map_errors(cfg, in_grid(model).filter(|c| c.log_z.is_some()))
                } else {
                    Vec::new()
                };
                GridModelSummary {
                    grid: n,
                    n_points: n_points[gi],
                    model,
                    log_mean_z: (!zs.is_empty()).then(|| log_mean_exp(&zs)),
                    mean_log_z: (!zs.is_empty()).then(|| zs.iter().sum::<f64>() / zs.len() as f64),
                    posterior_prob: None,
                    completed: zs.len(),
                    failed,
                    map_errors,
                }
            })
            .collect();
        let selectable: Vec<usize> = (0..grid_rows.len())
            .filter(|&i| !grid_rows[i].model.reference && grid_rows[i].log_mean_z.is_some())
            .collect();
        let lz: Vec<f64> = selectable.iter().map(|&i| grid_rows[i].log_mean_z.unwrap_or(f64::NEG_INFINITY)).collect();
        let probs = model_posteriors(&lz, &vec![1.0 / lz.len().max(1) as f64; lz.len()]);
        for (&i, p) in selectable.iter().zip(probs) {
            grid_rows[i].posterior_prob = Some(p);
        }
        let p_gt = grid_rows.iter().find(|r| r.model == gt).and_then(|r| r.posterior_prob).unwrap_or(0.0);

        let mut hits = 0usize;
        for r in 0..cfg.replicates {
            let rep: Vec<&CellResult> = cells
                .iter()
                .filter(|c| c.grid == n && c.replicate == r && !c.model.reference)
                .collect();
            let best = rep
                .iter()
                .filter_map(|c| c.log_z.map(|z| (c.model, z)))
                .fold(None::<(ModelShorthand, f64)>, |acc, (m, z)| match acc {
                    Some((_, bz)) if bz >= z => acc,
                    _ => Some((m, z)),
                });
            if best.is_some_and(|(m, _)| m == gt) {
                hits += 1;
            }
        }
        let incomplete = grid_rows.iter().any(|r| r.failed > 0);
        grids.push(GridSummary {
            grid: n,
            n_points: n_points[gi],
            p_gt,
            accuracy: hits as f64 / cfg.replicates as f64,
            incomplete,
        });
        rows.extend(grid_rows);
    }
    (rows, grids)
}

fn map_errors<'a>(cfg: &StudyConfig, cells: impl Iterator<Item = &'a CellResult>) -> Vec<ParamError> {
    let cells: Vec<&CellResult> = cells.collect();
    let Some(first) = cells.first() else {
        return Vec::new();
    };
    first
        .map
        .iter()
        .enumerate()
        .filter_map(|(i, (name, _))| {
            let truth = crate::likelihood::CorrParam::parse(name).map(|p| cfg.theta_c.get(p))?;
            let vals: Vec<f64> = cells.iter().filter_map(|c| c.map.get(i).map(|(_, v)| *v)).collect();
            let k = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / k;
            let var = if vals.len() > 1 {
                vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)
            } else {
                0.0
            };
            Some(ParamError {
                name: name.clone(),
                ground_truth: truth,
                mean_map: mean,
                rel_error: (mean - truth).abs() / truth.abs(),
                cov: var.sqrt() / mean.abs(),
            })
        })
        .collect()
}
