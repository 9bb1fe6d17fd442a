use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::nested::NestedRun;
use super::problem::BayesProblem;
use crate::error::{Error, Result};

/// Sample with the largest log-likelihood plus log-prior. Priors are uniform,
/// so this is the best-likelihood sample; ties keep the first occurrence.
/// A sample-based approximation of the MAP, not an optimizer result.
pub fn map_estimate(run: &NestedRun) -> Option<&[f64]> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in run.samples.iter().enumerate() {
        if best.is_none_or(|(_, l)| s.loglik > l) {
            best = Some((i, s.loglik));
        }
    }
    best.map(|(i, _)| run.samples[i].theta.as_slice())
}

/// Shortest interval holding at least `mass` of the weighted samples.
pub fn highest_density_interval(values: &[f64], weights: &[f64], mass: f64) -> Option<(f64, f64)> {
    if values.is_empty() || values.len() != weights.len() {
        return None;
    }
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let total: f64 = weights.iter().sum();
    let target = mass * total;
    let (mut best, mut lo, mut acc) = (None::<(f64, f64)>, 0usize, 0.0);
    for hi in 0..idx.len() {
        acc += weights[idx[hi]];
        while lo < hi && acc - weights[idx[lo]] >= target {
            acc -= weights[idx[lo]];
            lo += 1;
        }
        if acc >= target {
            let (a, b) = (values[idx[lo]], values[idx[hi]]);
            if best.is_none_or(|(x, y)| b - a < y - x) {
                best = Some((a, b));
            }
        }
    }
    best
}

/// Multinomial draw of `n` sample indices from normalized weights.
pub fn resample_indices(run: &NestedRun, n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut cdf = Vec::with_capacity(run.samples.len());
    let mut acc = 0.0;
    for s in &run.samples {
        acc += s.log_weight.exp();
        cdf.push(acc);
    }
    (0..n)
        .map(|_| {
            let u = rng.random::<f64>() * acc;
            cdf.partition_point(|c| *c <= u).min(cdf.len() - 1)
        })
        .collect()
}

/// `n_draws` replicated datasets: θ drawn from the weighted posterior, then
/// data drawn from the problem's Gaussian data model at θ. Rows span all
/// lanes of the problem's grid.
pub fn posterior_predictive(run: &NestedRun, problem: &BayesProblem, n_draws: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if run.samples.is_empty() {
        return Err(Error::Config("posterior run holds no samples".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = resample_indices(run, n_draws, &mut rng);
    picks
        .into_iter()
        .map(|i| problem.simulate(&run.samples[i].theta, &mut rng))
        .collect()
}
