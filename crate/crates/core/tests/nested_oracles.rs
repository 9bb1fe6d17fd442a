use bsi_core::inference::{
    highest_density_interval, map_estimate, model_posteriors, nested_sample, NestedRun, PriorBound, PriorBox,
    SamplerConfig, Serial, Termination,
};
use bsi_core::Error;
use proptest::prelude::*;
use proptest::test_runner::RngSeed;

fn fixed(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        rng_seed: RngSeed::Fixed(0x0b51_2024),
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn cube(d: usize, lo: f64, hi: f64) -> PriorBox {
    PriorBox::new((0..d).map(|i| PriorBound::new(format!("p{i}"), lo, hi)).collect()).unwrap()
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

fn log_std_gauss(th: &[f64]) -> f64 {
    th.iter()
        .map(|v| -0.5 * v * v - 0.5 * (2.0 * std::f64::consts::PI).ln())
        .sum()
}

/// Evidence of a standard Gaussian likelihood under a uniform prior on
/// `[-5, 5]^d`: Gaussian box mass over box volume.
fn gaussian_box_log_z(d: usize) -> f64 {
    let mass = std_normal_cdf(5.0) - std_normal_cdf(-5.0);
    d as f64 * (mass.ln() - 10f64.ln())
}

fn sampler(n_live: usize) -> SamplerConfig {
    SamplerConfig {
        n_live,
        ..SamplerConfig::default()
    }
}

#[test]
fn gaussian_in_box_evidence() {
    let truth = gaussian_box_log_z(2);
    assert!((truth + 4.6052).abs() < 1e-4);
    let run = nested_sample(log_std_gauss, &cube(2, -5.0, 5.0), &sampler(500), 11, &Serial).unwrap();
    let delta = (run.log_z - truth).abs();
    assert!(delta <= 0.15, "{} vs {truth}", run.log_z);
    assert!(delta <= 3.0 * run.log_z_err);
    assert_eq!(run.termination, Termination::Converged);
    let total: f64 = run.weights().iter().sum();
    assert!((total - 1.0).abs() <= 1e-12);
    assert!(!run.diagnostics.low_acceptance_warning);
}

fn calibration(d: usize, runs: u64, n_live: usize) -> usize {
    let truth = gaussian_box_log_z(d);
    (0..runs)
        .filter(|&seed| {
            let run = nested_sample(log_std_gauss, &cube(d, -5.0, 5.0), &sampler(n_live), seed, &Serial).unwrap();
            (run.log_z - truth).abs() <= 3.0 * run.log_z_err
        })
        .count()
}

#[test]
fn evidence_calibrated_in_two_dimensions() {
    let hits = calibration(2, 50, 500);
    assert!(hits >= 45, "{hits}/50 within 3 stderr");
}

#[test]
fn evidence_calibrated_in_five_dimensions() {
    let hits = calibration(5, 50, 500);
    assert!(hits >= 45, "{hits}/50 within 3 stderr");
}

#[test]
fn flat_likelihood_gives_its_constant() {
    let c = -3.25;
    let run = nested_sample(|_: &[f64]| c, &cube(3, 0.0, 2.0), &sampler(100), 1, &Serial).unwrap();
    assert!((run.log_z - c).abs() <= 1e-6);
    assert_eq!(run.termination, Termination::Plateau);
    // Uniform posterior: the 90% HD interval spans ~90% of the box.
    let vals: Vec<f64> = run.samples.iter().map(|s| s.theta[0]).collect();
    let (a, b) = highest_density_interval(&vals, &run.weights(), 0.9).unwrap();
    assert!(((b - a) / 2.0 - 0.9).abs() <= 0.05 * 0.9, "{a} {b}");
    // Ties keep the first sample.
    assert_eq!(map_estimate(&run).unwrap(), run.samples[0].theta.as_slice());
}

#[test]
fn all_invalid_likelihood_is_an_error() {
    let r = nested_sample(|_: &[f64]| f64::NEG_INFINITY, &cube(2, 0.0, 1.0), &sampler(20), 1, &Serial);
    assert!(matches!(r, Err(Error::NoValidRegion)));
    let r = nested_sample(|_: &[f64]| f64::NAN, &cube(2, 0.0, 1.0), &sampler(20), 1, &Serial);
    assert!(matches!(r, Err(Error::NoValidRegion)));
}

#[test]
fn invalid_regions_are_rejected() {
    // Half the box is excluded; evidence halves.
    let ll = |th: &[f64]| if th[0] < 0.0 { f64::NEG_INFINITY } else { log_std_gauss(th) };
    let run = nested_sample(ll, &cube(2, -5.0, 5.0), &sampler(400), 5, &Serial).unwrap();
    let truth = gaussian_box_log_z(2) - 2f64.ln();
    assert!((run.log_z - truth).abs() <= 0.2, "{} vs {truth}", run.log_z);
    assert!(run.samples.iter().all(|s| s.theta[0] >= 0.0));
}

/// Adaptive Simpson on `[a, b]`.
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 40)
}

#[test]
fn correlated_gaussian_near_a_corner_matches_quadrature() {
    let (mx, my, sx, sy, rho) = (4.2, 3.6, 0.8, 1.1, 0.6);
    let ll = move |th: &[f64]| {
        let (u, v) = ((th[0] - mx) / sx, (th[1] - my) / sy);
        let q = (u * u - 2.0 * rho * u * v + v * v) / (1.0 - rho * rho);
        -0.5 * q - (2.0 * std::f64::consts::PI * sx * sy * (1.0 - rho * rho).sqrt()).ln()
    };
    let inner = |x: f64| simpson(&|y: f64| ll(&[x, y]).exp(), -5.0, 5.0, 1e-12);
    let oracle = (simpson(&inner, -5.0, 5.0, 1e-10) / 100.0).ln();
    let run = nested_sample(ll, &cube(2, -5.0, 5.0), &sampler(500), 3, &Serial).unwrap();
    assert!((run.log_z - oracle).abs() <= 0.2, "{} vs {oracle}", run.log_z);
}

#[test]
fn conjugate_posterior_mean() {
    // y_i = a + b·x_i + e_i with known noise; a flat prior far wider than
    // the posterior makes the posterior the least-squares Gaussian.
    let xs: Vec<f64> = (0..20).map(|i| i as f64 / 4.0 - 2.5).collect();
    let ys: Vec<f64> = xs.iter().enumerate().map(|(i, x)| 1.3 - 0.7 * x + 0.3 * ((i * 7 % 11) as f64 / 5.5 - 1.0)).collect();
    let s = 0.5;
    let ll = |th: &[f64]| -> f64 {
        xs.iter()
            .zip(&ys)
            .map(|(x, y)| {
                let r = y - th[0] - th[1] * x;
                -0.5 * r * r / (s * s)
            })
            .sum()
    };
    let n = xs.len() as f64;
    let (sx, sy) = (xs.iter().sum::<f64>(), ys.iter().sum::<f64>());
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
    let det = n * sxx - sx * sx;
    let b = (n * sxy - sx * sy) / det;
    let a = (sy - b * sx) / n;
    let sd = [(s * s * sxx / det).sqrt(), (s * s * n / det).sqrt()];
    let prior = PriorBox::new(vec![PriorBound::new("a", -10.0, 10.0), PriorBound::new("b", -10.0, 10.0)]).unwrap();
    let run = nested_sample(ll, &prior, &sampler(500), 9, &Serial).unwrap();
    let w = run.weights();
    let ess = 1.0 / w.iter().map(|v| v * v).sum::<f64>();
    let mean = run.mean();
    for (i, truth) in [a, b].into_iter().enumerate() {
        let mc = sd[i] / ess.sqrt();
        assert!((mean[i] - truth).abs() <= 3.0 * mc, "param {i}: {} vs {truth} (mc {mc})", mean[i]);
    }
    let map = map_estimate(&run).unwrap();
    assert!(prior.contains(map));
    assert!(run.samples.iter().all(|s| s.loglik <= ll(map)));
}

#[test]
fn identical_seed_reproduces_run() {
    let go = |seed| nested_sample(log_std_gauss, &cube(3, -5.0, 5.0), &sampler(60), seed, &Serial).unwrap();
    let (a, b): (NestedRun, NestedRun) = (go(4), go(4));
    assert_eq!(a, b);
    assert_ne!(a.log_z, go(5).log_z);
}

#[test]
fn rejects_too_few_live_points() {
    assert!(nested_sample(log_std_gauss, &cube(3, -5.0, 5.0), &sampler(5), 0, &Serial).is_err());
}

proptest! {
    #![proptest_config(fixed(256))]

    #[test]
    fn model_posteriors_normalized_and_equivariant(
        zs in prop::collection::vec(-2000.0f64..2000.0, 1..8),
        rot in 0usize..8,
    ) {
        let k = zs.len();
        let pri = vec![1.0 / k as f64; k];
        let p = model_posteriors(&zs, &pri);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        let mut perm = zs.clone();
        perm.rotate_left(rot % k);
        let q = model_posteriors(&perm, &pri);
        let mut p_rot = p.clone();
        p_rot.rotate_left(rot % k);
        for (a, b) in p_rot.iter().zip(&q) {
            prop_assert!((a - b).abs() <= 1e-15);
        }
    }
}
