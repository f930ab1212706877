//! Multi-seed training runs and their CSV output.
//!
//! Files written to the output directory:
//!
//! | file                     | content                                            |
//! |--------------------------|----------------------------------------------------|
//! | `run_XXX.csv`            | one row per estimate, columns [`RUN_HEADER`]       |
//! | `aggregate.csv`          | per-bucket mean and std across runs, [`AGGREGATE_HEADER`] |
//! | `run_XXX_final.theta`    | last iterate                                       |
//! | `run_XXX_output.theta`   | uniformly selected stored iterate                  |
//! | `run_XXX_weights.csv`    | importance-weight summaries (`weight_diagnostics`) |

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use vrpg_core::envs::{Acrobot, CartPole};
use vrpg_core::estimators::WeightStats;
use vrpg_core::mdp::Environment;
use vrpg_core::optimizers::{Branch, IterateRow, Optimizer};
use vrpg_core::policy::ParamVector;
use vrpg_core::rng::{Purpose, SeedTree};

use crate::config::{EnvSpec, RunConfig};
use crate::error::{HarnessError, Result};

pub const RUN_HEADER: [&str; 7] = ["run_id", "iteration", "cum_episodes", "branch", "avg_return", "v_norm", "ms"];
pub const AGGREGATE_HEADER: [&str; 5] = ["bucket", "episodes", "runs", "mean_return", "std_return"];

/// One line of a per-run CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub run_id: usize,
    pub iteration: u64,
    pub cum_episodes: u64,
    pub branch: Branch,
    pub avg_return: f64,
    pub v_norm: f64,
    pub ms: u64,
    /// Not written; kept for bucketing.
    pub episodes_used: u64,
}

impl RunRecord {
    fn new(run_id: usize, row: &IterateRow, ms: u64) -> Self {
        RunRecord {
            run_id,
            iteration: row.iteration,
            cum_episodes: row.cum_episodes,
            branch: row.branch,
            avg_return: row.avg_return,
            v_norm: row.v_norm,
            ms,
            episodes_used: row.episodes_used,
        }
    }

    fn csv_fields(&self) -> [String; 7] {
        [
            self.run_id.to_string(),
            self.iteration.to_string(),
            self.cum_episodes.to_string(),
            self.branch.name().to_string(),
            self.avg_return.to_string(),
            self.v_norm.to_string(),
            self.ms.to_string(),
        ]
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub run_id: usize,
    pub records: Vec<RunRecord>,
    pub final_theta: Option<ParamVector>,
    pub output_theta: Option<ParamVector>,
    pub diverged: bool,
}

impl RunResult {
    /// Episode-weighted mean return over the last `window` episodes of the
    /// run; NaN for diverged or empty runs.
    pub fn final_return(&self, window: u64) -> f64 {
        let Some(last) = self.records.last() else { return f64::NAN };
        if self.diverged {
            return f64::NAN;
        }
        let start = last.cum_episodes.saturating_sub(window);
        let (mut sum, mut weight) = (0.0, 0.0);
        for r in self.records.iter().filter(|r| r.cum_episodes > start) {
            sum += r.avg_return * r.episodes_used as f64;
            weight += r.episodes_used as f64;
        }
        sum / weight
    }

    pub fn cum_episodes(&self) -> u64 {
        self.records.last().map_or(0, |r| r.cum_episodes)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BucketRow {
    /// 1-based bucket index k, covering cumulative episodes in ((k−1)w, kw].
    pub bucket: u64,
    /// Upper edge kw.
    pub episodes: u64,
    pub runs: usize,
    pub mean: f64,
    /// Population standard deviation across runs.
    pub std: f64,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub out_dir: PathBuf,
    pub runs: Vec<RunResult>,
    pub aggregate: Vec<BucketRow>,
}

pub fn run_file(out_dir: &Path, run_id: usize) -> PathBuf {
    out_dir.join(format!("run_{run_id:03}.csv"))
}

pub fn aggregate_file(out_dir: &Path) -> PathBuf {
    out_dir.join("aggregate.csv")
}

fn create(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|source| HarnessError::File { path: path.into(), source })?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

/// Runs every seed of `cfg` (concurrently) and writes all output files.
pub fn train(cfg: &RunConfig, out_dir: &Path) -> Result<TrainReport> {
    fs::create_dir_all(out_dir).map_err(|source| HarnessError::File { path: out_dir.into(), source })?;
    let runs = (0..cfg.runs).into_par_iter().map(|id| execute_run(cfg, id, out_dir)).collect::<Result<Vec<_>>>()?;
    let per_run: Vec<&[RunRecord]> = runs.iter().map(|r| r.records.as_slice()).collect();
    let aggregate = aggregate(&per_run, cfg.bucket_width);
    write_aggregate(&aggregate_file(out_dir), &aggregate)?;
    Ok(TrainReport { out_dir: out_dir.into(), runs, aggregate })
}

pub fn execute_run(cfg: &RunConfig, run_id: usize, out_dir: &Path) -> Result<RunResult> {
    match &cfg.env {
        EnvSpec::CartPole => run_on(&CartPole::new(), cfg, run_id, out_dir),
        EnvSpec::Acrobot => run_on(&Acrobot::new(), cfg, run_id, out_dir),
        EnvSpec::Tabular { mdp, .. } => run_on(mdp, cfg, run_id, out_dir),
    }
}

fn run_on<E: Environment>(env: &E, cfg: &RunConfig, run_id: usize, out_dir: &Path) -> Result<RunResult> {
    let mut writer = create(&run_file(out_dir, run_id))?;
    writer.write_record(RUN_HEADER)?;
    let mut weights = if cfg.optimizer.weight_diagnostics {
        let mut w = create(&out_dir.join(format!("run_{run_id:03}_weights.csv")))?;
        w.write_record(WeightStats::CSV_HEADER)?;
        Some(w)
    } else {
        None
    };
    let mut result = RunResult { run_id, records: Vec::new(), final_theta: None, output_theta: None, diverged: false };
    if cfg.empty_budget() {
        writer.flush()?;
        if let Some(w) = weights.as_mut() {
            w.flush()?;
        }
        return Ok(result);
    }

    let seeds = SeedTree::new(cfg.seed).child(run_id as u64);
    let theta0 = cfg.policy.init_params(&mut seeds.stream(Purpose::Init, 0, 0));
    let start = Instant::now();
    let elapsed = || if cfg.timing { start.elapsed().as_millis() as u64 } else { 0 };
    let mut opt = Optimizer::new(env, &cfg.policy, theta0, cfg.optimizer.clone(), seeds)?;
    let mut emit = |row: &IterateRow, ms: u64, records: &mut Vec<RunRecord>| -> Result<()> {
        let rec = RunRecord::new(run_id, row, ms);
        writer.write_record(rec.csv_fields())?;
        if let (Some(w), Some(stats)) = (weights.as_mut(), row.weights.as_ref()) {
            w.write_record(stats.csv_record(run_id, row.iteration))?;
        }
        records.push(rec);
        Ok(())
    };
    let first = opt.log().last().cloned().expect("initial estimate is logged");
    emit(&first, elapsed(), &mut result.records)?;
    while let Some(row) = opt.step()? {
        let row = row.clone();
        emit(&row, elapsed(), &mut result.records)?;
    }
    let out = opt.finish();
    writer.flush()?;
    if let Some(w) = weights.as_mut() {
        w.flush()?;
    }

    result.diverged = out.state.diverged;
    if out.state.theta.is_finite() {
        out.state.theta.save(out_dir.join(format!("run_{run_id:03}_final.theta")))?;
        result.final_theta = Some(out.state.theta.clone());
    }
    if !out.iterates.is_empty() {
        let chosen = out.select_output(&mut seeds.stream(Purpose::Output, 0, 0))?;
        if chosen.is_finite() {
            chosen.save(out_dir.join(format!("run_{run_id:03}_output.theta")))?;
        }
        result.output_theta = Some(chosen);
    }
    Ok(result)
}

/// Buckets each run by cumulative episodes, then averages across runs.
///
/// A run's value in bucket k is the episode-weighted mean of the finite
/// `avg_return` values of its rows with cumulative episodes in ((k−1)w, kw].
/// Empty buckets inside a run carry the previous value forward; a run
/// contributes nothing past its own last bucket.
pub fn aggregate(runs: &[&[RunRecord]], width: u64) -> Vec<BucketRow> {
    assert!(width > 0, "bucket width must be positive");
    let per_run: Vec<Vec<Option<f64>>> = runs.iter().map(|records| bucket_values(records, width)).collect();
    let buckets = per_run.iter().map(Vec::len).max().unwrap_or(0);
    let mut rows = Vec::new();
    for k in 0..buckets {
        let values: Vec<f64> = per_run.iter().filter_map(|v| v.get(k).copied().flatten()).collect();
        if values.is_empty() {
            continue;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        rows.push(BucketRow {
            bucket: k as u64 + 1,
            episodes: (k as u64 + 1) * width,
            runs: values.len(),
            mean,
            std: var.sqrt(),
        });
    }
    rows
}

fn bucket_values(records: &[RunRecord], width: u64) -> Vec<Option<f64>> {
    let Some(last) = records.iter().map(|r| r.cum_episodes).max() else { return Vec::new() };
    let buckets = last.div_ceil(width) as usize;
    let mut sums = vec![(0.0, 0.0); buckets];
    for r in records.iter().filter(|r| r.avg_return.is_finite() && r.cum_episodes > 0) {
        let k = ((r.cum_episodes - 1) / width) as usize;
        sums[k].0 += r.avg_return * r.episodes_used as f64;
        sums[k].1 += r.episodes_used as f64;
    }
    let mut carried = None;
    sums.into_iter()
        .map(|(s, w)| {
            if w > 0.0 {
                carried = Some(s / w);
            }
            carried
        })
        .collect()
}

pub fn write_aggregate(path: &Path, rows: &[BucketRow]) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(AGGREGATE_HEADER)?;
    for r in rows {
        w.write_record([
            r.bucket.to_string(),
            r.episodes.to_string(),
            r.runs.to_string(),
            r.mean.to_string(),
            r.std.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
