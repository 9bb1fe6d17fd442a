//! Uniform priors, nested sampling, model selection and posterior summaries.

mod executor;
mod nested;
mod posterior;
mod prior;
mod problem;
mod selection;

pub use executor::{Executor, Serial};
pub use nested::{nested_sample, Diagnostics, NestedRun, SamplerConfig, Termination, WeightedSample};
pub use posterior::{highest_density_interval, map_estimate, posterior_predictive, resample_indices};
pub use prior::{
    default_corr_bounds, prior_transform, Param, PriorBound, PriorBox, LOG10_KR_BOUNDS, LOG10_KV_BOUNDS,
};
pub use problem::{reference_indices, BayesProblem, Dataset};
pub use selection::{bayes_factor, model_posteriors, BayesFactor, JeffreysLabel};
