//! Dataset CSV: columns `sensor_x, t, lane, y_obs`, one row per observation.
//!
//! Rows are ordered lane-major, then by load position `t`, then by sensor
//! `sensor_x`, which is the in-memory layout of [`Dataset`]. Both coordinate
//! lists must be strictly increasing and every (lane, t, x) cell present
//! exactly once.

use std::path::Path;

use bsi_core::inference::Dataset;
use bsi_core::kernels::SpaceTimeGrid;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::io::{num, write_atomic};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Row {
    sensor_x: f64,
    t: f64,
    lane: usize,
    y_obs: f64,
}

pub fn parse_dataset(text: &str, path: &Path) -> Result<Dataset> {
    let bad = |msg: String| CliError::Dataset {
        path: path.to_path_buf(),
        msg,
    };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let rows: Vec<Row> = rdr
        .deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| bad(format!("row {}: {e}", i + 1))))
        .collect::<Result<_>>()?;
    let first = rows.first().ok_or_else(|| bad("no rows".into()))?;
    if first.lane != 0 {
        return Err(bad("lanes must start at 0".into()));
    }
    // Sensors are read off the first load position of lane 0, load
    // positions off the first sensor.
    let x: Vec<f64> = rows
        .iter()
        .take_while(|r| r.lane == 0 && r.t == first.t)
        .map(|r| r.sensor_x)
        .collect();
    let n_x = x.len();
    let t: Vec<f64> = rows
        .iter()
        .take_while(|r| r.lane == 0)
        .step_by(n_x)
        .map(|r| r.t)
        .collect();
    let grid = SpaceTimeGrid::new(x, t).map_err(|e| bad(e.to_string()))?;
    let n = grid.len();
    if rows.len() % n != 0 {
        return Err(bad(format!("{} rows is not a whole number of {n}-point lanes", rows.len())));
    }
    for (i, r) in rows.iter().enumerate() {
        let (lane, k, j) = (i / n, (i % n) / n_x, i % n_x);
        if r.lane != lane || r.t != grid.t()[k] || r.sensor_x != grid.x()[j] {
            return Err(bad(format!(
                "row {} is (lane {}, t {}, x {}); expected (lane {lane}, t {}, x {})",
                i + 1,
                r.lane,
                r.t,
                r.sensor_x,
                grid.t()[k],
                grid.x()[j]
            )));
        }
        if !r.y_obs.is_finite() {
            return Err(bad(format!("row {}: y_obs is not finite", i + 1)));
        }
    }
    Ok(Dataset::new(grid, rows.iter().map(|r| r.y_obs).collect())?)
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_dataset(&text, path)
}

pub fn dataset_bytes(data: &Dataset) -> Vec<u8> {
    let g = &data.grid;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["sensor_x", "t", "lane", "y_obs"]).expect("in-memory write");
    for (i, y) in data.y_obs.iter().enumerate() {
        let (lane, k, j) = (i / g.len(), (i % g.len()) / g.n_x(), i % g.n_x());
        w.write_record([num(g.x()[j]), num(g.t()[k]), lane.to_string(), num(*y)])
            .expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    write_atomic(path, &dataset_bytes(data))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Dataset {
        let grid = SpaceTimeGrid::new(vec![10.0, 20.5, 31.0], vec![0.0, 2.5]).unwrap();
        Dataset::new(grid, (0..12).map(|i| i as f64 * 0.1 - 0.3).collect()).unwrap()
    }

    #[test]
    fn round_trip() {
        let d = sample();
        let text = String::from_utf8(dataset_bytes(&d)).unwrap();
        assert!(text.starts_with("sensor_x,t,lane,y_obs\n10,0,0,-0.3\n"));
        assert_eq!(parse_dataset(&text, Path::new("d.csv")).unwrap(), d);
    }

    #[test]
    fn rejects_shuffled_and_ragged_rows() {
        let text = String::from_utf8(dataset_bytes(&sample())).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        lines.swap(1, 2);
        assert!(parse_dataset(&lines.join("\n"), Path::new("d.csv")).is_err());
        let lines: Vec<&str> = text.lines().take(11).collect();
        assert!(parse_dataset(&lines.join("\n"), Path::new("d.csv")).is_err());
        let dup = "sensor_x,t,lane,y_obs\n1,0,0,1\n1,0,0,2\n";
        assert!(parse_dataset(dup, Path::new("d.csv")).is_err());
        assert!(parse_dataset("sensor_x,t,lane,y_obs\n", Path::new("d.csv")).is_err());
    }
}
