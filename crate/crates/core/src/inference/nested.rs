//! Static nested sampling with likelihood-constrained random walks.
//!
//! The prior volume shrinks deterministically, `log X_k = −k / n_live`, and
//! the evidence is accumulated with the trapezoid rule. With `W` workers the
//! `W` worst points are removed per iteration (volumes shrink by
//! `1/n, 1/(n−1), …` as in the final live-point sweep) and refilled by `W`
//! independent walks; `W = 1` is the textbook scheme and is bitwise
//! reproducible for a fixed seed.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::executor::Executor;
use super::prior::PriorBox;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    pub n_live: usize,
    /// Stop once the remaining evidence bound `ln(1 + X·L_max / Z)` is below
    /// this.
    pub dlogz: f64,
    pub walk_steps: usize,
    /// Hard cap on iterations; `None` runs to convergence.
    pub max_iterations: Option<usize>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_live: 500,
            dlogz: 0.01,
            walk_steps: 25,
            max_iterations: None,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.n_live < 2 || self.n_live < 2 * dim {
            return Err(Error::Config(alloc::format!(
                "n_live = {} must be at least max(2, 2·dim = {})",
                self.n_live,
                2 * dim
            )));
        }
        if !(self.dlogz > 0.0) {
            return Err(Error::Config("dlogz must be positive".into()));
        }
        if self.walk_steps == 0 {
            return Err(Error::Config("walk_steps must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedSample {
    pub theta: Vec<f64>,
    pub loglik: f64,
    /// Normalized posterior log-weight.
    pub log_weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Remaining evidence bound fell below `dlogz`.
    Converged,
    /// All live points share one likelihood value.
    Plateau,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub workers: usize,
    /// Accepted / proposed over all walks.
    pub acceptance: f64,
    /// Lowest smoothed acceptance seen after warm-up.
    pub min_acceptance: f64,
    /// Smoothed acceptance dropped below 5%.
    pub low_acceptance_warning: bool,
    pub final_step_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NestedRun {
    pub names: Vec<String>,
    pub samples: Vec<WeightedSample>,
    pub log_z: f64,
    pub log_z_err: f64,
    /// Kullback-Leibler information of posterior vs prior, nats.
    pub information: f64,
    pub nfe: u64,
    pub n_live: usize,
    pub iterations: usize,
    pub termination: Termination,
    pub seed: u64,
    pub config: SamplerConfig,
    pub diagnostics: Diagnostics,
}

impl NestedRun {
    pub fn weights(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.log_weight.exp()).collect()
    }

    /// Posterior mean of every parameter.
    pub fn mean(&self) -> Vec<f64> {
        let d = self.names.len();
        let mut m = vec![0.0; d];
        for s in &self.samples {
            let w = s.log_weight.exp();
            for (mi, v) in m.iter_mut().zip(&s.theta) {
                *mi += w * v;
            }
        }
        m
    }
}

const WARMUP: usize = 50;
const LOW_ACCEPTANCE: f64 = 0.05;
const TARGET_ACCEPTANCE: f64 = 0.5;

fn logaddexp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + (-(a - b).abs()).exp().ln_1p()
}

fn sanitize(l: f64) -> f64 {
    if l.is_nan() {
        f64::NEG_INFINITY
    } else {
        l
    }
}

struct WalkResult {
    u: Vec<f64>,
    theta: Vec<f64>,
    loglik: f64,
    accepted: usize,
    nfe: u64,
}

/// Metropolis walk on the unit cube restricted to `L > threshold`.
#[allow(clippy::too_many_arguments)]
fn walk<F: Fn(&[f64]) -> f64>(
    loglik: &F,
    prior: &PriorBox,
    start_u: &[f64],
    start_theta: &[f64],
    start_l: f64,
    threshold: f64,
    chol: &DMatrix<f64>,
    scale: f64,
    steps: usize,
    seed: u64,
) -> WalkResult {
    let d = start_u.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = start_u.to_vec();
    let mut theta = start_theta.to_vec();
    let mut l = start_l;
    let mut accepted = 0;
    let mut nfe = 0;
    let mut z = DVector::<f64>::zeros(d);
    for _ in 0..steps {
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        let step = chol * &z;
        let prop: Vec<f64> = u.iter().zip(step.iter()).map(|(a, s)| a + scale * s).collect();
        if prop.iter().any(|v| !(0.0..=1.0).contains(v)) {
            continue;
        }
        let th = prior.transform(&prop);
        let lp = sanitize(loglik(&th));
        nfe += 1;
        if lp > threshold {
            u = prop;
            theta = th;
            l = lp;
            accepted += 1;
        }
    }
    WalkResult {
        u,
        theta,
        loglik: l,
        accepted,
        nfe,
    }
}

/// Cholesky factor of the live-point covariance in the unit cube; falls back
/// to the diagonal when the covariance is degenerate.
fn proposal_factor(live_u: &[Vec<f64>], d: usize) -> DMatrix<f64> {
    let n = live_u.len() as f64;
    let mut mean = vec![0.0; d];
    for u in live_u {
        for (m, v) in mean.iter_mut().zip(u) {
            *m += v / n;
        }
    }
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for u in live_u {
        for a in 0..d {
            let da = u[a] - mean[a];
            for b in 0..=a {
                cov[(a, b)] += da * (u[b] - mean[b]) / (n - 1.0);
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            cov[(b, a)] = cov[(a, b)];
        }
        cov[(a, a)] += 1e-12;
    }
    match cov.clone().cholesky() {
        Some(c) => c.l(),
        None => DMatrix::from_diagonal(&cov.diagonal().map(|v| v.max(1e-12).sqrt())),
    }
}

/// Runs static nested sampling of `loglik` under the uniform `prior`.
///
/// Non-finite likelihoods count as rejections; if no prior draw yields a
/// finite value the result is [`Error::NoValidRegion`].
pub fn nested_sample<F, E>(loglik: F, prior: &PriorBox, cfg: &SamplerConfig, seed: u64, exec: &E) -> Result<NestedRun>
where
    F: Fn(&[f64]) -> f64 + Sync,
    E: Executor,
{
    let d = prior.dim();
    cfg.validate(d)?;
    let n_live = cfg.n_live;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nfe: u64 = 0;

    // Initial live set: prior draws, redrawing non-finite likelihoods.
    let mut live_u: Vec<Vec<f64>> = Vec::with_capacity(n_live);
    let mut live_theta: Vec<Vec<f64>> = Vec::with_capacity(n_live);
    let mut live_l: Vec<f64> = Vec::with_capacity(n_live);
    let max_draws = 1000 * n_live as u64;
    let mut valid_draws: u64 = 0;
    while live_u.len() < n_live {
        let need = n_live - live_u.len();
        let batch: Vec<Vec<f64>> = (0..need)
            .map(|_| (0..d).map(|_| rng.random::<f64>()).collect())
            .collect();
        let evals = exec.map(need, |i| {
            let th = prior.transform(&batch[i]);
            let l = sanitize(loglik(&th));
            (th, l)
        });
        nfe += need as u64;
        for (u, (th, l)) in batch.into_iter().zip(evals) {
            if l > f64::NEG_INFINITY {
                valid_draws += 1;
                live_u.push(u);
                live_theta.push(th);
                live_l.push(l);
            }
        }
        if live_u.is_empty() || nfe > max_draws {
            return Err(Error::NoValidRegion);
        }
    }

    let mut dead: Vec<(Vec<f64>, f64, f64)> = Vec::new();
    // Live points are uniform on the finite-likelihood region, whose prior
    // mass is estimated by the initial acceptance fraction.
    let mut log_x = (valid_draws as f64 / nfe as f64).ln();
    let mut log_z = f64::NEG_INFINITY;
    let mut prev_l = f64::NEG_INFINITY;
    let mut scale = 1.0f64;
    let mut proposed = 0u64;
    let mut accepted_total = 0u64;
    let mut smoothed = TARGET_ACCEPTANCE;
    let mut min_smoothed = f64::INFINITY;
    let mut low_warning = false;
    let mut iterations = 0usize;
    let batch = exec.workers().clamp(1, (n_live / 2).max(1));

    let termination = loop {
        let lmin = live_l.iter().cloned().fold(f64::INFINITY, f64::min);
        let lmax = live_l.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if lmin == lmax {
            break Termination::Plateau;
        }
        if log_z > f64::NEG_INFINITY && logaddexp(log_z, log_x + lmax) - log_z < cfg.dlogz {
            break Termination::Converged;
        }
        if cfg.max_iterations.is_some_and(|m| iterations >= m) {
            break Termination::MaxIterations;
        }

        let mut order: Vec<usize> = (0..n_live).collect();
        order.sort_by(|&a, &b| live_l[a].total_cmp(&live_l[b]).then(a.cmp(&b)));
        let removed = &order[..batch];
        for (j, &i) in removed.iter().enumerate() {
            let shrink = 1.0 / (n_live - j) as f64;
            let log_dx = log_x + (-(-shrink).exp_m1()).ln();
            let log_wt = logaddexp(prev_l, live_l[i]) + log_dx - core::f64::consts::LN_2;
            log_z = logaddexp(log_z, log_wt);
            dead.push((live_theta[i].clone(), live_l[i], log_wt));
            prev_l = live_l[i];
            log_x -= shrink;
        }
        let threshold = live_l[removed[batch - 1]];

        let survivors: Vec<usize> = order[batch..].iter().cloned().filter(|&i| live_l[i] > threshold).collect();
        let survivors = if survivors.is_empty() { order[batch..].to_vec() } else { survivors };
        let chol = proposal_factor(&live_u, d);
        let starts: Vec<(usize, u64)> = (0..batch)
            .map(|_| (survivors[rng.random_range(0..survivors.len())], rng.next_u64()))
            .collect();
        let results = exec.map(batch, |w| {
            let (s, walk_seed) = starts[w];
            walk(
                &loglik,
                prior,
                &live_u[s],
                &live_theta[s],
                live_l[s],
                threshold,
                &chol,
                scale,
                cfg.walk_steps,
                walk_seed,
            )
        });
        let mut acc = 0usize;
        for (&slot, r) in removed.iter().zip(results) {
            acc += r.accepted;
            nfe += r.nfe;
            live_u[slot] = r.u;
            live_theta[slot] = r.theta;
            live_l[slot] = r.loglik;
        }
        let steps = (batch * cfg.walk_steps) as f64;
        let rate = acc as f64 / steps;
        proposed += steps as u64;
        accepted_total += acc as u64;
        scale = (scale * (rate - TARGET_ACCEPTANCE).exp()).clamp(1e-6, 10.0);
        smoothed = 0.95 * smoothed + 0.05 * rate;
        iterations += 1;
        if iterations >= WARMUP {
            min_smoothed = min_smoothed.min(smoothed);
            low_warning |= smoothed < LOW_ACCEPTANCE;
        }
    };

    // Remaining live points share the last volume equally.
    let mut order: Vec<usize> = (0..n_live).collect();
    order.sort_by(|&a, &b| live_l[a].total_cmp(&live_l[b]).then(a.cmp(&b)));
    let log_dx = log_x - (n_live as f64).ln();
    for &i in &order {
        let log_wt = live_l[i] + log_dx;
        log_z = logaddexp(log_z, log_wt);
        dead.push((live_theta[i].clone(), live_l[i], log_wt));
    }

    let samples: Vec<WeightedSample> = dead
        .into_iter()
        .map(|(theta, loglik, w)| WeightedSample {
            theta,
            loglik,
            log_weight: w - log_z,
        })
        .collect();
    let information = (samples
        .iter()
        .map(|s| {
            let p = s.log_weight.exp();
            if p > 0.0 {
                p * s.loglik
            } else {
                0.0
            }
        })
        .sum::<f64>()
        - log_z)
        .max(0.0);

    Ok(NestedRun {
        names: prior.names(),
        samples,
        log_z,
        log_z_err: (information / n_live as f64).sqrt(),
        information,
        nfe,
        n_live,
        iterations,
        termination,
        seed,
        config: cfg.clone(),
        diagnostics: Diagnostics {
            workers: exec.workers(),
            acceptance: if proposed > 0 {
                accepted_total as f64 / proposed as f64
            } else {
                1.0
            },
            min_acceptance: if min_smoothed.is_finite() { min_smoothed } else { smoothed },
            low_acceptance_warning: low_warning,
            final_step_scale: scale,
        },
    })
}
