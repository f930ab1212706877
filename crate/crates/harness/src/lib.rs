//! Experiment harness: configuration, multi-seed training with CSV output,
//! grid search, verification suites and the theory-constant calculator.

pub mod config;
pub mod constants;
pub mod error;
pub mod grid;
pub mod train;
pub mod verify;

use std::path::{Path, PathBuf};

pub use config::{ConfigFile, RunConfig};
pub use error::{HarnessError, Result};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "VRPG_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "results";

/// Command-line values that take precedence over the configuration file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
    }

    /// `--out-dir`, then the config's `out_dir`, then `$VRPG_OUT_DIR`, then `results`.
    pub fn out_dir(&self, cfg: Option<&Path>) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| cfg.map(Path::to_path_buf))
            .or_else(|| std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }
}

pub fn cmd_train(config: &Path, overrides: &Overrides) -> Result<train::TrainReport> {
    let file = ConfigFile::load(config)?;
    let mut cfg = RunConfig::from_file(&file)?;
    overrides.apply(&mut cfg);
    let out = overrides.out_dir(cfg.out_dir.as_deref());
    train::train(&cfg, &out)
}

pub fn cmd_grid(config: &Path, overrides: &Overrides) -> Result<grid::GridReport> {
    let file = ConfigFile::load(config)?;
    let base = RunConfig::from_file(&file)?;
    let out = overrides.out_dir(base.out_dir.as_deref());
    grid::grid(&file, &out, |cfg| overrides.apply(cfg))
}

/// Runs one suite and returns its checks; the caller decides the exit code.
pub fn cmd_verify(suite: &str, opts: &verify::VerifyOptions) -> Result<Vec<verify::Check>> {
    verify::run_suite(suite.parse()?, opts)
}
