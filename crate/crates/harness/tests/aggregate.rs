use std::collections::BTreeMap;
use std::fs;

use vrpg_harness::config::{ConfigFile, RunConfig};
use vrpg_harness::train::{aggregate_file, run_file, train};

fn read_csv(path: &std::path::Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    text.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

/// Recomputes the aggregate straight from the per-run files, deriving each
/// row's episode count from consecutive cumulative counts.
#[test]
fn aggregate_matches_recomputation_from_run_files() {
    let text = "\
[experiment]
env = fixture:three_action_grid
seed = 21
runs = 4
bucket_width = 37

[optimizer]
algorithm = page-pg
eta = 0.3
N = 12
B = 3
p = 0.2
gamma = 0.9
max_episodes = 700
";
    let cfg = RunConfig::from_file(&ConfigFile::parse(text).unwrap()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    train(&cfg, dir.path()).unwrap();

    let width = 37u64;
    let mut per_run: Vec<BTreeMap<u64, f64>> = Vec::new();
    for r in 0..4 {
        let rows = read_csv(&run_file(dir.path(), r));
        let mut prev = 0u64;
        let mut sums: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
        for row in &rows {
            assert_eq!(row.len(), 7);
            let cum: u64 = row[2].parse().unwrap();
            assert!(cum > prev, "cumulative episodes must increase");
            let used = (cum - prev) as f64;
            prev = cum;
            let ret: f64 = row[4].parse().unwrap();
            let bucket = cum.div_ceil(width);
            let e = sums.entry(bucket).or_insert((0.0, 0.0));
            e.0 += ret * used;
            e.1 += used;
        }
        let last_bucket = prev.div_ceil(width);
        let mut values = BTreeMap::new();
        let mut carried = None;
        for k in 1..=last_bucket {
            if let Some((s, w)) = sums.get(&k) {
                carried = Some(s / w);
            }
            if let Some(v) = carried {
                values.insert(k, v);
            }
        }
        per_run.push(values);
    }

    let agg = read_csv(&aggregate_file(dir.path()));
    assert!(!agg.is_empty());
    for row in &agg {
        let k: u64 = row[0].parse().unwrap();
        assert_eq!(row[1].parse::<u64>().unwrap(), k * width);
        let vals: Vec<f64> = per_run.iter().filter_map(|m| m.get(&k).copied()).collect();
        assert_eq!(row[2].parse::<usize>().unwrap(), vals.len());
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let std = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64).sqrt();
        assert!((row[3].parse::<f64>().unwrap() - mean).abs() < 1e-12, "bucket {k}");
        assert!((row[4].parse::<f64>().unwrap() - std).abs() < 1e-12, "bucket {k}");
    }
}
