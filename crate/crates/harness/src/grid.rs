//! Cartesian grid search over `[grid]` value lists.

use std::cmp::Ordering;
use std::path::{Path, PathBuf};

use crate::config::{ConfigFile, Entry, RunConfig, DEFAULT_GRID_CAP};
use crate::error::{HarnessError, Result};
use crate::train::{train, TrainReport};

pub const SUMMARY_FIXED: [&str; 4] = ["point", "mean_final_return", "mean_cum_episodes", "diverged_runs"];

/// One combination of grid values, in file order of the `[grid]` keys.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub index: usize,
    pub values: Vec<(String, String)>,
}

impl GridPoint {
    pub fn label(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(" ")
    }

    pub fn dir_name(&self) -> String {
        format!("point_{:03}", self.index)
    }
}

#[derive(Debug, Clone)]
pub struct PointResult {
    pub point: GridPoint,
    /// Mean over runs of the final return; NaN if any run diverged.
    pub mean_final_return: f64,
    pub mean_cum_episodes: f64,
    pub diverged_runs: usize,
    pub report: TrainReport,
}

#[derive(Debug, Clone)]
pub struct GridReport {
    pub keys: Vec<String>,
    pub results: Vec<PointResult>,
    /// Index into `results` of the winner.
    pub best: usize,
}

impl GridReport {
    pub fn best(&self) -> &PointResult {
        &self.results[self.best]
    }
}

/// Lists the grid points of `file`, refusing products above `cap`
/// (from `[grid] cap`, default [`DEFAULT_GRID_CAP`]).
pub fn expand(file: &ConfigFile) -> Result<Vec<GridPoint>> {
    let cap: u128 = file.get("grid", "cap").map(|e| e.parse("a point count")).transpose()?.unwrap_or(DEFAULT_GRID_CAP);
    let axes: Vec<(&Entry, Vec<String>)> = file
        .section("grid")
        .iter()
        .filter(|e| e.key != "cap")
        .map(|e| e.list().map(|values| (e, values)))
        .collect::<Result<_>>()?;
    let size = axes.iter().map(|(_, v)| v.len() as u128).product::<u128>();
    if size > cap {
        return Err(HarnessError::GridTooLarge { size, cap });
    }
    let mut points = Vec::with_capacity(size as usize);
    for index in 0..size as usize {
        // Mixed radix with the first key as the most significant digit.
        let mut rest = index;
        let mut values = vec![(String::new(), String::new()); axes.len()];
        for (slot, (entry, options)) in values.iter_mut().zip(&axes).rev() {
            *slot = (entry.key.clone(), options[rest % options.len()].clone());
            rest /= options.len();
        }
        points.push(GridPoint { index, values });
    }
    Ok(points)
}

/// Configuration of one grid point: the base file with the point's values
/// written into `[optimizer]`.
pub fn point_config(file: &ConfigFile, point: &GridPoint) -> Result<RunConfig> {
    let mut cfg = file.clone();
    for (key, value) in &point.values {
        let line = file.get("grid", key).map_or(0, |e| e.line);
        cfg.set("optimizer", key, value, line);
    }
    RunConfig::from_file(&cfg)
}

/// Descending final return with NaN last, then fewer episodes, then point order.
fn rank(a: &PointResult, b: &PointResult) -> Ordering {
    let by_return = match (a.mean_final_return.is_nan(), b.mean_final_return.is_nan()) {
        (true, true) => Ordering::Equal,
        (true, false) => Ordering::Greater,
        (false, true) => Ordering::Less,
        (false, false) => b.mean_final_return.total_cmp(&a.mean_final_return),
    };
    by_return.then(a.mean_cum_episodes.total_cmp(&b.mean_cum_episodes)).then(a.point.index.cmp(&b.point.index))
}

/// Runs every grid point into `out_dir/point_XXX/` and writes `out_dir/grid.csv`.
pub fn grid(file: &ConfigFile, out_dir: &Path, adjust: impl Fn(&mut RunConfig)) -> Result<GridReport> {
    let points = expand(file)?;
    // Validate every point before running any of them.
    let configs = points
        .iter()
        .map(|p| {
            let mut cfg = point_config(file, p)?;
            adjust(&mut cfg);
            Ok(cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let keys: Vec<String> =
        points.first().map(|p| p.values.iter().map(|(k, _)| k.clone()).collect()).unwrap_or_default();
    let mut results = Vec::with_capacity(points.len());
    for (point, cfg) in points.into_iter().zip(configs) {
        let dir: PathBuf = out_dir.join(point.dir_name());
        let report = train(&cfg, &dir)?;
        let runs = report.runs.len().max(1) as f64;
        let finals: Vec<f64> = report.runs.iter().map(|r| r.final_return(cfg.bucket_width)).collect();
        let mean_final_return = finals.iter().sum::<f64>() / runs;
        let mean_cum_episodes = report.runs.iter().map(|r| r.cum_episodes() as f64).sum::<f64>() / runs;
        let diverged_runs = report.runs.iter().filter(|r| r.diverged).count();
        results.push(PointResult { point, mean_final_return, mean_cum_episodes, diverged_runs, report });
    }
    let best = (0..results.len()).min_by(|&a, &b| rank(&results[a], &results[b])).unwrap_or(0);

    let path = out_dir.join("grid.csv");
    let file = std::fs::File::create(&path).map_err(|source| HarnessError::File { path: path.clone(), source })?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let header: Vec<&str> = std::iter::once("point")
        .chain(keys.iter().map(String::as_str))
        .chain(SUMMARY_FIXED[1..].iter().copied())
        .collect();
    w.write_record(&header)?;
    for r in &results {
        let mut rec = vec![r.point.index.to_string()];
        rec.extend(r.point.values.iter().map(|(_, v)| v.clone()));
        rec.push(r.mean_final_return.to_string());
        rec.push(r.mean_cum_episodes.to_string());
        rec.push(r.diverged_runs.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(GridReport { keys, results, best })
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "[experiment]\nenv = fixture:two_state_chain\n[optimizer]\nalgorithm = gpomdp\neta = 0.1\niterations = 3\nN = 4\n";

    #[test]
    fn expansion_is_lexicographic() {
        let text = format!("{BASE}[grid]\neta = 0.1, 0.2\nN = 4, 8, 16\n");
        let pts = expand(&ConfigFile::parse(&text).unwrap()).unwrap();
        let labels: Vec<String> = pts.iter().map(GridPoint::label).collect();
        assert_eq!(labels[0], "eta=0.1 large_batch=4");
        assert_eq!(labels[1], "eta=0.1 large_batch=8");
        assert_eq!(labels[3], "eta=0.2 large_batch=4");
        assert_eq!(labels.len(), 6);
    }

    #[test]
    fn cap_refuses_with_size() {
        let text = format!("{BASE}[grid]\ncap = 5\neta = 0.1, 0.2\nN = 4, 8, 16\n");
        match expand(&ConfigFile::parse(&text).unwrap()) {
            Err(HarnessError::GridTooLarge { size: 6, cap: 5 }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn no_grid_section_is_a_single_point() {
        let pts = expand(&ConfigFile::parse(BASE).unwrap()).unwrap();
        assert_eq!(pts.len(), 1);
        assert!(pts[0].values.is_empty());
    }

    fn result(index: usize, ret: f64, eps: f64) -> PointResult {
        PointResult {
            point: GridPoint { index, values: vec![] },
            mean_final_return: ret,
            mean_cum_episodes: eps,
            diverged_runs: 0,
            report: TrainReport { out_dir: PathBuf::new(), runs: vec![], aggregate: vec![] },
        }
    }

    #[test]
    fn ranking_rules() {
        assert_eq!(rank(&result(0, f64::NAN, 1.0), &result(1, -1e9, 1.0)), Ordering::Greater);
        assert_eq!(rank(&result(0, 5.0, 10.0), &result(1, 5.0, 9.0)), Ordering::Greater);
        assert_eq!(rank(&result(0, 5.0, 9.0), &result(1, 5.0, 9.0)), Ordering::Less);
        assert_eq!(rank(&result(1, 6.0, 99.0), &result(0, 5.0, 9.0)), Ordering::Less);
    }
}
