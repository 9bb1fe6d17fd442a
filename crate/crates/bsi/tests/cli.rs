use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command as Proc;

use bsi::commands::infer::{posterior_summary, RunArchive};
use bsi::{execute, Command, Overrides};
use bsi_core::beam::{BeamGeometry, BeamModel, ThetaS, TruckLoad};
use tempfile::TempDir;

fn write_config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, json).unwrap();
    p
}

fn run_in(dir: &Path, cmd: Command, json: &str, out: &str) -> PathBuf {
    let cfg = write_config(dir, &format!("{out}.json"), json);
    let out = dir.join(out);
    let ov = Overrides {
        workers: Some(1),
        out: Some(out.clone()),
        ..Overrides::default()
    };
    execute(cmd, &cfg, &ov).unwrap_or_else(|e| panic!("{cmd:?} failed: {e}"));
    out
}

fn read_csv(p: &Path) -> Vec<BTreeMap<String, String>> {
    let mut r = csv::Reader::from_path(p).unwrap();
    let header: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            header.iter().cloned().zip(rec.iter().map(String::from)).collect()
        })
        .collect()
}

fn f(row: &BTreeMap<String, String>, k: &str) -> f64 {
    row[k].parse().unwrap_or_else(|_| panic!("column {k} = {:?}", row[k]))
}

fn dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

#[test]
fn study_smoke_has_one_row_per_model() {
    let tmp = TempDir::new().unwrap();
    let json = r#"{
        "version": 1, "seed": 11, "models": ["IID-A", "EXP-A"],
        "sampler": {"n_live": 40},
        "study": {"ground_truth": "EXP-A", "grids": [1], "replicates": 1}
    }"#;
    let a = run_in(tmp.path(), Command::Study, json, "a");
    let rows = read_csv(&a.join("study_summary.csv"));
    assert_eq!(rows.len(), 2);
    for r in &rows {
        let acc = f(r, "accuracy");
        assert!((0.0..=1.0).contains(&acc), "accuracy {acc}");
        assert_eq!(r["completed"], "1");
    }
    let b = run_in(tmp.path(), Command::Study, json, "b");
    assert_eq!(dir_bytes(&a), dir_bytes(&b));
}

#[test]
fn identical_models_get_equal_probabilities() {
    let tmp = TempDir::new().unwrap();
    let out = run_in(
        tmp.path(),
        Command::Select,
        r#"{
            "version": 1, "seed": 5, "models": ["IID-A", "IID-A"],
            "sampler": {"n_live": 50},
            "data": {"synthetic": {"sensors_per_span": 1, "model": "IID-A"}}
        }"#,
        "o",
    );
    let rows = read_csv(&out.join("selection.csv"));
    assert_eq!(rows.len(), 2);
    assert_eq!(f(&rows[0], "posterior_prob"), 0.5);
    assert_eq!(f(&rows[1], "posterior_prob"), 0.5);
    assert_eq!(f(&rows[1], "log10_bf_best_over_model"), 0.0);
}

#[test]
fn correlated_data_selects_the_correlated_model() {
    let tmp = TempDir::new().unwrap();
    let out = run_in(
        tmp.path(),
        Command::Select,
        r#"{
            "version": 1, "seed": 2024, "models": ["IID-A", "EXP-A"],
            "sampler": {"n_live": 100},
            "data": {"synthetic": {"sensors_per_span": 5, "model": "EXP-A"}}
        }"#,
        "o",
    );
    let rows = read_csv(&out.join("selection.csv"));
    let exp = rows.iter().find(|r| r["model"] == "EXP-A").unwrap();
    assert_eq!(f(exp, "n_points"), 1250.0);
    assert!(f(exp, "posterior_prob") > 0.9, "{exp:?}");
}

#[test]
fn reference_models_are_left_out_of_normalization() {
    let tmp = TempDir::new().unwrap();
    let out = run_in(
        tmp.path(),
        Command::Select,
        r#"{
            "version": 1, "seed": 3, "models": ["IID-A", "EXP-A", "REF-A"],
            "sampler": {"n_live": 50},
            "data": {"synthetic": {"sensors_per_span": 1, "model": "EXP-A"}}
        }"#,
        "o",
    );
    let rows = read_csv(&out.join("selection.csv"));
    let reference = rows.iter().find(|r| r["model"] == "REF-A").unwrap();
    assert_eq!(reference["posterior_prob"], "");
    assert_eq!(reference["label"], "");
    assert!(f(reference, "n_points") < f(&rows[0], "n_points"));
    let total: f64 = rows
        .iter()
        .filter(|r| r["model"] != "REF-A")
        .map(|r| f(r, "posterior_prob"))
        .sum();
    assert!((total - 1.0).abs() < 1e-12);
    // Labels follow the Jeffreys thresholds on log10 of the Bayes factor.
    for r in rows.iter().filter(|r| r["model"] != "REF-A") {
        let b = f(r, "log10_bf_best_over_model");
        let want = bsi_core::inference::JeffreysLabel::from_log10(b).as_str();
        assert_eq!(r["label"], want);
    }
}

/// With `IID-A` and every structural parameter fixed, the posterior of
/// `sigma_model` is `∝ σ^-N exp(-S / 2σ²)` on the prior interval.
#[test]
fn infer_matches_one_dimensional_quadrature() {
    let tmp = TempDir::new().unwrap();
    let out = run_in(
        tmp.path(),
        Command::Infer,
        r#"{
            "version": 1, "seed": 17, "models": ["IID-A"],
            "sampler": {"n_live": 300},
            "data": {"synthetic": {"sensors_per_span": 1, "model": "IID-A"}}
        }"#,
        "o",
    );
    let data = bsi::dataset::read_dataset(&out.join("data.csv")).unwrap();
    let geometry = BeamGeometry::default();
    let beam = BeamModel::new(geometry.clone(), data.grid.x()).unwrap();
    let y = beam
        .model_response_grid(&ThetaS::midpoint(4), &TruckLoad::standard_pair(&geometry), &data.grid)
        .unwrap();
    let s: f64 = data.y_obs.iter().zip(&y).map(|(o, m)| (o - m).powi(2)).sum();
    let n = y.len() as f64;
    let log_post = |sig: f64| -n * sig.ln() - s / (2.0 * sig * sig);

    // Midpoint rule on a fine grid; the density vanishes near 0.
    let (a, b, k) = (1e-3, 5.0, 200_000);
    let h = (b - a) / k as f64;
    let xs: Vec<f64> = (0..k).map(|i| a + (i as f64 + 0.5) * h).collect();
    let peak = xs.iter().map(|&x| log_post(x)).fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = xs.iter().map(|&x| (log_post(x) - peak).exp()).collect();
    let z: f64 = w.iter().sum();
    let mean: f64 = xs.iter().zip(&w).map(|(x, w)| x * w).sum::<f64>() / z;
    let var: f64 = xs.iter().zip(&w).map(|(x, w)| (x - mean).powi(2) * w).sum::<f64>() / z;

    let archive: RunArchive = serde_json::from_slice(&fs::read(out.join("run.json")).unwrap()).unwrap();
    let ws = archive.run.weights();
    let ess = 1.0 / ws.iter().map(|w| w * w).sum::<f64>();
    let got = archive.run.mean()[0];
    let tol = 3.0 * var.sqrt() / ess.sqrt();
    assert!((got - mean).abs() <= tol, "mean {got} vs {mean} (tol {tol}, ess {ess})");
}

#[test]
fn flat_parameter_interval_covers_ninety_percent_of_its_box() {
    // Uncoupled girders: Kv has no effect, so its posterior is the prior.
    let tmp = TempDir::new().unwrap();
    let mut geometry = BeamGeometry::default();
    geometry.coupling_spacing = None;
    let json = format!(
        r#"{{
            "version": 1, "seed": 8, "models": ["IID-A"], "infer_structural": ["log10_kv"],
            "geometry": {},
            "sampler": {{"n_live": 400}},
            "data": {{"synthetic": {{"sensors_per_span": 1, "model": "IID-A"}}}}
        }}"#,
        serde_json::to_string(&geometry).unwrap()
    );
    let out = run_in(tmp.path(), Command::Infer, &json, "o");
    let rows = read_csv(&out.join("posterior_summary.csv"));
    let kv = rows.iter().find(|r| r["parameter"] == "log10_kv").unwrap();
    let width = f(kv, "hdi90_upper") - f(kv, "hdi90_lower");
    assert!((width / 8.0 - 0.9).abs() <= 0.05, "interval width {width}");
}

#[test]
fn archive_reload_reproduces_summary_and_prediction() {
    let tmp = TempDir::new().unwrap();
    let base = r#""version": 1, "seed": 21, "models": ["EXP-A"],
        "sampler": {"n_live": 40},
        "data": {"synthetic": {"sensors_per_span": 1, "model": "EXP-A"}}"#;
    let first = run_in(
        tmp.path(),
        Command::Predict,
        &format!(r#"{{ {base}, "predict": {{"n_draws": 30}} }}"#),
        "first",
    );
    let archive: RunArchive = serde_json::from_slice(&fs::read(first.join("run.json")).unwrap()).unwrap();
    assert_eq!(
        posterior_summary(&archive.run).to_bytes(),
        fs::read(first.join("posterior_summary.csv")).unwrap()
    );

    let again = run_in(
        tmp.path(),
        Command::Predict,
        &format!(r#"{{ {base}, "predict": {{"n_draws": 30, "archive": "first/run.json"}} }}"#),
        "again",
    );
    assert!(!again.join("run.json").exists());
    assert_eq!(
        fs::read(first.join("predictive.csv")).unwrap(),
        fs::read(again.join("predictive.csv")).unwrap()
    );
    let rows = read_csv(&again.join("predictive.csv"));
    assert_eq!(rows.len(), archive.n_points);
    assert!(rows.iter().all(|r| f(r, "q05") <= f(r, "mean") && f(r, "mean") <= f(r, "q95")));
}

#[test]
fn archive_for_another_model_is_rejected() {
    let tmp = TempDir::new().unwrap();
    run_in(
        tmp.path(),
        Command::Infer,
        r#"{"version": 1, "models": ["IID-A"], "sampler": {"n_live": 20},
            "data": {"synthetic": {"sensors_per_span": 1, "model": "IID-A"}}}"#,
        "first",
    );
    let cfg = write_config(
        tmp.path(),
        "bad.json",
        r#"{"version": 1, "models": ["EXP-A"], "predict": {"archive": "first/run.json"},
            "data": {"synthetic": {"sensors_per_span": 1, "model": "IID-A"}}}"#,
    );
    let ov = Overrides {
        out: Some(tmp.path().join("bad")),
        ..Overrides::default()
    };
    assert!(execute(Command::Predict, &cfg, &ov).is_err());
}

fn peaks(rows: &[BTreeMap<String, String>], lane: &str, sensor: &str) -> Vec<(f64, f64)> {
    rows.iter()
        .filter(|r| r["lane"] == lane && r["sensor"] == sensor)
        .map(|r| (f(r, "value"), f(r, "peak_stress")))
        .collect()
}

#[test]
fn weak_coupling_isolates_the_girders() {
    let tmp = TempDir::new().unwrap();
    let out = run_in(
        tmp.path(),
        Command::Sweep,
        r#"{"version": 1, "sweep": {"parameter": "log10_kv", "points": 1, "sensors": [22.5, 147.5]}}"#,
        "o",
    );
    let rows = read_csv(&out.join("sweep.csv"));
    // One value, two lanes, two sensors.
    assert_eq!(rows.len(), 4);
    for s in ["22.5", "147.5"] {
        let (v, left) = peaks(&rows, "0", s)[0];
        let (_, right) = peaks(&rows, "1", s)[0];
        assert_eq!(v, 0.0);
        assert!(left.abs() < 0.01 * right.abs(), "sensor {s}: {left} vs {right}");
    }
}

#[test]
fn stiffer_end_spring_sheds_first_span_moment() {
    let tmp = TempDir::new().unwrap();
    let out = run_in(
        tmp.path(),
        Command::Sweep,
        r#"{"version": 1, "sweep": {"parameter": "log10_kr_1", "points": 10, "sensors": [22.5]}}"#,
        "o",
    );
    let rows = read_csv(&out.join("sweep.csv"));
    let p = peaks(&rows, "1", "22.5");
    assert_eq!(p.len(), 10);
    assert_eq!((p[0].0, p[9].0), (4.0, 10.0));
    for w in p.windows(2) {
        assert!(w[1].1.abs() <= w[0].1.abs() * (1.0 + 1e-12), "{w:?}");
    }
    assert!(p[9].1.abs() < p[0].1.abs());
}

#[test]
fn single_point_sweep_gives_one_row() {
    let tmp = TempDir::new().unwrap();
    let out = run_in(
        tmp.path(),
        Command::Sweep,
        r#"{"version": 1, "trucks": [{"axle_offsets": [0.0], "axle_loads": [100.0], "lane": "Right", "z": 3.0}],
            "sweep": {"parameter": "log10_kr_1", "points": 1, "sensors": [70.0]}}"#,
        "o",
    );
    assert_eq!(read_csv(&out.join("sweep.csv")).len(), 1);
}

#[test]
fn bench_paths_agree_and_dense_grows_faster() {
    let tmp = TempDir::new().unwrap();
    let out = run_in(
        tmp.path(),
        Command::LoglikBench,
        r#"{"version": 1, "bench": {"ladder": [64, 256, 1024], "models": ["EXP-M", "EXP-A", "IID-M"], "repeats": 3}}"#,
        "o",
    );
    for r in read_csv(&out.join("bench_values.csv")) {
        assert!(f(&r, "abs_diff") <= 1e-6, "{r:?}");
    }
    let timing = read_csv(&out.join("bench_timing.csv"));
    let ms = |n: &str, model: &str, dense: bool| {
        timing
            .iter()
            .find(|r| r["n"] == n && r["model"] == model && (r["path"] == "dense") == dense)
            .map(|r| f(r, "mean_ms"))
            .unwrap()
    };
    for model in ["EXP-M", "EXP-A"] {
        let dense = ms("1024", model, true) / ms("256", model, true);
        let fast = ms("1024", model, false) / ms("256", model, false);
        assert!(dense >= fast, "{model}: dense ratio {dense}, fast ratio {fast}");
    }
}

#[test]
fn bench_runs_fast_path_above_the_dense_cap() {
    let tmp = TempDir::new().unwrap();
    let out = run_in(
        tmp.path(),
        Command::LoglikBench,
        r#"{"version": 1, "bench": {"ladder": [4096], "repeats": 1, "dense_max": 2048}}"#,
        "o",
    );
    let rows = read_csv(&out.join("bench_values.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["path"], "multiplicative_fast");
    assert_eq!(rows[0]["dense_loglik"], "skipped");
    assert!(f(&rows[0], "loglik").is_finite());
}

fn bsi(dir: &Path, args: &[&str]) -> std::process::Output {
    Proc::new(env!("CARGO_BIN_EXE_bsi")).current_dir(dir).args(args).output().unwrap()
}

#[test]
fn invalid_configs_exit_nonzero_with_a_message() {
    let tmp = TempDir::new().unwrap();
    let cases = [
        ("unknown.json", r#"{"version": 1, "colour": "red"}"#, "study"),
        ("version.json", r#"{"version": 99}"#, "sweep"),
        ("nolive.json", r#"{"version": 1, "models": ["IID-A"], "sampler": {"n_live": 1}}"#, "infer"),
        ("shorthand.json", r#"{"version": 1, "models": ["XYZ-A"]}"#, "select"),
        ("nodata.json", r#"{"version": 1, "models": ["IID-A"]}"#, "infer"),
    ];
    for (name, json, sub) in cases {
        write_config(tmp.path(), name, json);
        let o = bsi(tmp.path(), &[sub, "--config", name, "--out", "out"]);
        assert!(!o.status.success(), "{name} should fail");
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.starts_with("error: "), "{name}: {err}");
    }
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn unsupported_model_surfaces_the_likelihood_error() {
    let tmp = TempDir::new().unwrap();
    write_config(
        tmp.path(),
        "c.json",
        r#"{"version": 1, "models": ["RBF-M"], "sampler": {"n_live": 20},
            "data": {"synthetic": {"sensors_per_span": 13, "model": "IID-A"}}}"#,
    );
    let o = bsi(tmp.path(), &["infer", "--config", "c.json", "--out", "out"]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    let want = bsi_core::Error::Unsupported(format!(
        "RBF-M with 4225 points needs the dense path, capped at {}",
        bsi_core::likelihood::N_DENSE_MAX
    ));
    assert!(err.contains(&want.to_string()), "{err}");
}

#[test]
fn binary_writes_files_and_lists_them() {
    let tmp = TempDir::new().unwrap();
    write_config(
        tmp.path(),
        "c.json",
        r#"{"version": 1, "output": "res", "sweep": {"parameter": "log10_kv", "points": 2, "sensors": [22.5]}}"#,
    );
    let o = bsi(tmp.path(), &["sweep", "--config", "c.json", "--workers", "2", "--seed", "9"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let listed = String::from_utf8_lossy(&o.stdout);
    assert!(listed.contains("sweep.csv") && listed.contains("config.json"));
    let echoed: bsi::RunConfig = serde_json::from_slice(&fs::read(tmp.path().join("res/config.json")).unwrap()).unwrap();
    assert_eq!(echoed.seed, 9);
}
