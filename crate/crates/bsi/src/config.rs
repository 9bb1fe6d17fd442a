//! Run configuration: one versioned JSON document shared by every
//! subcommand. Unknown keys are rejected and everything is validated before
//! any computation starts.

use std::path::{Path, PathBuf};

use bsi_core::beam::{BeamGeometry, ThetaS, TruckLoad};
use bsi_core::inference::{Param, PriorBound, PriorBox, SamplerConfig};
use bsi_core::likelihood::{ModelShorthand, ThetaC};
use bsi_core::study::default_ground_truth;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Must equal [`SCHEMA_VERSION`].
    pub version: u32,
    #[serde(default)]
    pub seed: u64,
    /// Output directory; `--out` takes precedence.
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub geometry: BeamGeometry,
    /// One truck per lane; defaults to the standard truck over each girder.
    #[serde(default)]
    pub trucks: Option<Vec<TruckLoad>>,
    /// Structural parameters; defaults to the prior midpoints.
    #[serde(default)]
    pub theta_s: Option<ThetaS>,
    #[serde(default)]
    pub data: Option<DataSource>,
    /// Model pool, by shorthand (`"EXP-A"`, `"IID-M"`, `"REF-A"`, ...).
    #[serde(default)]
    pub models: Vec<ModelShorthand>,
    /// Structural parameters to infer, e.g. `"log10_kv"`, `"log10_kr_2"`.
    #[serde(default)]
    pub infer_structural: Vec<String>,
    /// Overrides of the default uniform prior bounds, by parameter name.
    #[serde(default)]
    pub priors: Vec<PriorBound>,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub bench: Option<BenchConfig>,
    #[serde(default)]
    pub study: Option<StudySection>,
    #[serde(default)]
    pub predict: Option<PredictConfig>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// Dataset CSV; relative paths resolve against the config file.
    File { path: PathBuf },
    Synthetic(SyntheticData),
}

/// Data drawn from `model` at `theta_c` around the beam response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticData {
    pub sensors_per_span: usize,
    /// Number of load positions; defaults to spans × sensors per span.
    #[serde(default)]
    pub load_positions: Option<usize>,
    pub model: ModelShorthand,
    #[serde(default = "default_ground_truth")]
    pub theta_c: ThetaC,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    /// Problem sizes `N = m · sensors`; each must be a multiple of `sensors`.
    #[serde(default = "default_ladder")]
    pub ladder: Vec<usize>,
    #[serde(default = "default_bench_sensors")]
    pub sensors: usize,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    /// Dense evaluation is skipped above this size.
    #[serde(default = "default_dense_max")]
    pub dense_max: usize,
    #[serde(default = "default_bench_models")]
    pub models: Vec<ModelShorthand>,
    #[serde(default = "default_ground_truth")]
    pub theta_c: ThetaC,
}

fn default_ladder() -> Vec<usize> {
    vec![64, 256, 1024, 2048, 4096]
}

fn default_bench_sensors() -> usize {
    4
}

fn default_repeats() -> usize {
    3
}

fn default_dense_max() -> usize {
    2048
}

fn default_bench_models() -> Vec<ModelShorthand> {
    vec!["EXP-M".parse().expect("valid shorthand")]
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            ladder: default_ladder(),
            sensors: default_bench_sensors(),
            repeats: default_repeats(),
            dense_max: default_dense_max(),
            models: default_bench_models(),
            theta_c: default_ground_truth(),
        }
    }
}

/// Study budget presets. `Desk` is CI-sized; `Full` runs the complete protocol
/// (grids 1..=10, 50 replicates).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    #[default]
    Desk,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    pub ground_truth: ModelShorthand,
    #[serde(default = "default_ground_truth")]
    pub theta_c: ThetaC,
    #[serde(default)]
    pub protocol: Protocol,
    /// Overrides the protocol's grids.
    #[serde(default)]
    pub grids: Option<Vec<usize>>,
    /// Overrides the protocol's replicate count.
    #[serde(default)]
    pub replicates: Option<usize>,
}

impl StudySection {
    pub fn grids(&self) -> Vec<usize> {
        self.grids.clone().unwrap_or_else(|| match self.protocol {
            Protocol::Desk => vec![1, 2, 3, 5, 8],
            Protocol::Full => (1..=10).collect(),
        })
    }

    pub fn replicates(&self) -> usize {
        self.replicates.unwrap_or(match self.protocol {
            Protocol::Desk => 10,
            Protocol::Full => 50,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictConfig {
    #[serde(default = "default_draws")]
    pub n_draws: usize,
    /// Posterior archive (`run.json`) to reuse instead of sampling again.
    #[serde(default)]
    pub archive: Option<PathBuf>,
}

fn default_draws() -> usize {
    200
}

impl Default for PredictConfig {
    fn default() -> Self {
        Self {
            n_draws: default_draws(),
            archive: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Structural parameter to sweep, e.g. `"log10_kv"`.
    pub parameter: String,
    #[serde(default = "default_points")]
    pub points: usize,
    /// Sweep range; defaults to the parameter's prior bounds.
    #[serde(default)]
    pub lower: Option<f64>,
    #[serde(default)]
    pub upper: Option<f64>,
    /// Sensor positions; defaults to the data grid's sensors.
    #[serde(default)]
    pub sensors: Option<Vec<f64>>,
    /// Spacing of truck positions along the bridge, m.
    #[serde(default = "default_load_step")]
    pub load_step: f64,
}

fn default_points() -> usize {
    13
}

fn default_load_step() -> f64 {
    0.5
}

/// Which subcommand a config is validated for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    LoglikBench,
    Study,
    Infer,
    Select,
    Predict,
    Sweep,
}

impl RunConfig {
    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        serde_json::from_str(text).map_err(|source| CliError::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text, path)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn trucks(&self) -> Vec<TruckLoad> {
        self.trucks.clone().unwrap_or_else(|| TruckLoad::standard_pair(&self.geometry))
    }

    pub fn theta_s(&self) -> ThetaS {
        self.theta_s
            .clone()
            .unwrap_or_else(|| ThetaS::midpoint(self.geometry.spring_supports.len()))
    }

    pub fn structural_params(&self) -> Result<Vec<Param>> {
        self.infer_structural
            .iter()
            .map(|s| match Param::parse(s) {
                Some(p @ (Param::Kv | Param::Kr(_))) => Ok(p),
                _ => Err(CliError::Config(format!("`{s}` is not a structural parameter"))),
            })
            .collect()
    }

    /// Checks everything the command will use; nothing is computed before
    /// this passes.
    pub fn validate(&self, cmd: Command) -> Result<()> {
        let cfg_err = |m: String| Err(CliError::Config(m));
        if self.version != SCHEMA_VERSION {
            return cfg_err(format!("unsupported schema version {} (expected {SCHEMA_VERSION})", self.version));
        }
        self.geometry.validate()?;
        let trucks = self.trucks();
        for t in &trucks {
            t.validate()?;
        }
        let ts = self.theta_s();
        if ts.log10_kr.len() != self.geometry.spring_supports.len() {
            return cfg_err(format!(
                "theta_s has {} rotational springs, geometry has {}",
                ts.log10_kr.len(),
                self.geometry.spring_supports.len()
            ));
        }
        if ts.log10_kr.iter().chain([&ts.log10_kv]).any(|v| v.is_nan() || *v == f64::INFINITY) {
            return cfg_err("theta_s values must be finite or -inf".into());
        }
        for p in self.structural_params()? {
            if let Param::Kr(i) = p {
                if i >= ts.log10_kr.len() {
                    return cfg_err(format!("{} has no matching spring support", p.name()));
                }
            }
        }
        PriorBox::new(self.priors.clone())?;
        if let Some(b) = self.priors.iter().find(|b| Param::parse(&b.name).is_none()) {
            return cfg_err(format!("prior for unknown parameter `{}`", b.name));
        }
        self.sampler.validate(1)?;

        let needs_models = matches!(cmd, Command::Study | Command::Infer | Command::Select | Command::Predict);
        if needs_models && self.models.is_empty() {
            return cfg_err("`models` is empty".into());
        }
        if matches!(cmd, Command::Infer | Command::Predict) && self.models.len() != 1 {
            return cfg_err(format!("this command needs exactly one model, got {}", self.models.len()));
        }
        let needs_data = matches!(cmd, Command::Infer | Command::Select | Command::Predict);
        match (&self.data, needs_data) {
            (None, true) => return cfg_err("`data` is required".into()),
            (Some(DataSource::Synthetic(s)), _) => {
                if s.sensors_per_span == 0 || s.load_positions == Some(0) {
                    return cfg_err("synthetic grid sizes must be positive".into());
                }
                if s.model.reference {
                    return cfg_err("a reference model cannot generate data".into());
                }
                s.model.active_spec(&s.theta_c, 2).validate()?;
            }
            _ => {}
        }
        match cmd {
            Command::LoglikBench => {
                let b = self.bench.clone().unwrap_or_default();
                if b.sensors == 0 || b.repeats == 0 || b.ladder.is_empty() || b.models.is_empty() {
                    return cfg_err("bench sensors, repeats, ladder and models must be nonempty".into());
                }
                if let Some(n) = b.ladder.iter().find(|n| **n == 0 || **n % b.sensors != 0) {
                    return cfg_err(format!("bench size {n} is not a positive multiple of {} sensors", b.sensors));
                }
                if b.models.iter().any(|m| m.reference) {
                    return cfg_err("reference models have no structured likelihood to bench".into());
                }
            }
            Command::Study => {
                let s = self.study.as_ref().ok_or_else(|| CliError::Config("`study` section is required".into()))?;
                self.study_config(s)?.validate()?;
            }
            Command::Predict => {
                if self.predict.as_ref().is_some_and(|p| p.n_draws == 0) {
                    return cfg_err("predict.n_draws must be at least 1".into());
                }
            }
            Command::Sweep => {
                let s = self.sweep.as_ref().ok_or_else(|| CliError::Config("`sweep` section is required".into()))?;
                let p = Param::parse(&s.parameter);
                match p {
                    Some(Param::Kv) => {}
                    Some(Param::Kr(i)) if i < ts.log10_kr.len() => {}
                    _ => return cfg_err(format!("cannot sweep `{}`", s.parameter)),
                }
                if s.points == 0 || !(s.load_step > 0.0) {
                    return cfg_err("sweep points and load_step must be positive".into());
                }
                let (lo, hi) = self.sweep_range(s)?;
                if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                    return cfg_err(format!("sweep range [{lo}, {hi}] is invalid"));
                }
                if s.sensors.is_none() && self.data.is_none() {
                    return cfg_err("sweep needs `sweep.sensors` or a `data` grid".into());
                }
            }
            Command::Infer | Command::Select => {}
        }
        Ok(())
    }

    /// Study settings assembled from the shared fields and the `study`
    /// section.
    pub fn study_config(&self, s: &StudySection) -> Result<bsi_core::study::StudyConfig> {
        let mut c = bsi_core::study::StudyConfig::new(s.ground_truth, self.models.clone(), s.grids(), s.replicates());
        c.theta_c = s.theta_c;
        c.theta_s = self.theta_s();
        c.seed = self.seed;
        c.sampler = self.sampler.clone();
        c.geometry = self.geometry.clone();
        c.trucks = self.trucks.clone();
        c.priors = self.priors.clone();
        Ok(c)
    }

    pub fn sweep_range(&self, s: &SweepConfig) -> Result<(f64, f64)> {
        let p = Param::parse(&s.parameter)
            .ok_or_else(|| CliError::Config(format!("unknown parameter `{}`", s.parameter)))?;
        let bound = self
            .priors
            .iter()
            .find(|b| b.name == s.parameter)
            .cloned()
            .unwrap_or_else(|| p.default_bound());
        Ok((s.lower.unwrap_or(bound.lower), s.upper.unwrap_or(bound.upper)))
    }
}
