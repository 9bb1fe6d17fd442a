//! Subcommand implementations. Each writes its files into the output
//! directory and returns their paths.

use std::path::PathBuf;

use bsi_core::beam::BeamModel;
use bsi_core::inference::{BayesProblem, Dataset};
use bsi_core::kernels::SpaceTimeGrid;
use bsi_core::likelihood::ModelShorthand;
use bsi_core::study::{derive_seed, make_sensor_grid, sample_synthetic};

use crate::config::{DataSource, RunConfig};
use crate::dataset::read_dataset;
use crate::error::{CliError, Result};
use crate::io::resolve;

pub mod bench;
pub mod infer;
pub mod select;
pub mod study;
pub mod sweep;

/// Seed streams, mixed with the run seed so each consumer draws
/// independent randomness.
pub(crate) mod stream {
    pub const DATA: u64 = 1;
    pub const SAMPLER: u64 = 2;
    pub const PREDICT: u64 = 3;
    pub const BENCH: u64 = 4;
}

/// Where a command reads relative inputs from and writes outputs to.
#[derive(Debug, Clone)]
pub struct Context {
    /// Directory of the config file; relative input paths resolve here.
    pub base: PathBuf,
    pub out: PathBuf,
    pub workers: usize,
}

impl Context {
    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

/// Seed part derived from a model's name, so the same model gets the same
/// stream wherever it sits in a pool.
pub(crate) fn model_key(m: ModelShorthand) -> u64 {
    m.to_string().bytes().fold(0u64, |h, b| h.wrapping_mul(0x100_0000_01b3) ^ u64::from(b))
}

/// Observation grid of the configured data source, without reading noise.
pub(crate) fn data_grid(cfg: &RunConfig, ctx: &Context) -> Result<SpaceTimeGrid> {
    match &cfg.data {
        Some(DataSource::Synthetic(s)) => {
            let n_t = s.load_positions.unwrap_or(cfg.geometry.span_lengths.len() * s.sensors_per_span);
            Ok(make_sensor_grid(s.sensors_per_span, n_t, &cfg.geometry)?)
        }
        Some(DataSource::File { path }) => Ok(read_dataset(&resolve(&ctx.base, path))?.grid),
        None => Err(CliError::Config("`data` is required".into())),
    }
}

/// The dataset to fit, and whether it was generated (and so worth saving).
pub(crate) fn load_data(cfg: &RunConfig, ctx: &Context) -> Result<(Dataset, bool)> {
    let data = match &cfg.data {
        Some(DataSource::Synthetic(s)) => {
            let grid = data_grid(cfg, ctx)?;
            let beam = BeamModel::new(cfg.geometry.clone(), grid.x())?;
            let y = beam.model_response_grid(&cfg.theta_s(), &cfg.trucks(), &grid)?;
            let spec = s.model.active_spec(&s.theta_c, grid.n_x());
            let y_obs = sample_synthetic(&spec, &grid, &y, derive_seed(cfg.seed, &[stream::DATA]))?;
            return Ok((Dataset::new(grid, y_obs)?, true));
        }
        Some(DataSource::File { path }) => read_dataset(&resolve(&ctx.base, path))?,
        None => return Err(CliError::Config("`data` is required".into())),
    };
    if data.n_lanes() != cfg.trucks().len() {
        return Err(CliError::Config(format!(
            "dataset has {} lanes but {} trucks are configured",
            data.n_lanes(),
            cfg.trucks().len()
        )));
    }
    Ok((data, false))
}

pub(crate) fn build_problem(cfg: &RunConfig, data: Dataset, model: ModelShorthand) -> Result<BayesProblem> {
    let beam = BeamModel::new(cfg.geometry.clone(), data.grid.x())?;
    let problem = BayesProblem::new(
        model,
        beam,
        cfg.trucks(),
        data,
        cfg.theta_s(),
        &cfg.structural_params()?,
        &cfg.priors,
    )?;
    probe(&problem)?;
    Ok(problem)
}

/// Evaluates the likelihood at the prior centre so unsupported model and
/// path combinations fail with the likelihood's own error instead of an
/// all-rejected sampler run.
fn probe(problem: &BayesProblem) -> Result<()> {
    let centre: Vec<f64> = problem.prior().bounds().iter().map(|b| 0.5 * (b.lower + b.upper)).collect();
    match problem.try_loglik(&centre) {
        Err(
            e @ (bsi_core::Error::Unsupported(_)
            | bsi_core::Error::DenseCapExceeded { .. }
            | bsi_core::Error::StructuredPathUnavailable(_)),
        ) => Err(e.into()),
        _ => Ok(()),
    }
}
