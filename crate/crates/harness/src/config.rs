//! Plain-text experiment configuration.
//!
//! ```text
//! # comment
//! [experiment]
//! env = cartpole
//! seed = 7
//!
//! [optimizer]
//! algorithm = page-pg
//! eta = 5e-5
//! p = 0.01 -> 0.4      # linear ramp
//!
//! [grid]
//! eta = 1e-4, 5e-5     # comma-separated values, cmd_grid only
//! ```
//!
//! Keys are case-insensitive and `-` is read as `_`. Every error names the
//! offending line.

use std::fmt;
use std::path::{Path, PathBuf};

use vrpg_core::envs::TabularMdp;
use vrpg_core::estimators::EstimatorKind;
use vrpg_core::fixtures;
use vrpg_core::mdp::Discount;
use vrpg_core::optimizers::{Algorithm, OptimizerConfig, SwitchSchedule};
use vrpg_core::policy::{MlpSoftmax, PolicySpec};

use crate::error::{HarnessError, Result};

pub const SECTIONS: [&str; 4] = ["experiment", "policy", "optimizer", "grid"];

const EXPERIMENT_KEYS: [&str; 6] = ["env", "seed", "runs", "out_dir", "bucket_width", "timing"];
const POLICY_KEYS: [&str; 2] = ["kind", "hidden"];
pub const OPTIMIZER_KEYS: [&str; 14] = [
    "algorithm",
    "estimator",
    "eta",
    "large_batch",
    "small_batch",
    "inner_len",
    "alpha",
    "p",
    "gamma",
    "iterations",
    "max_episodes",
    "thinning",
    "weight_clip",
    "weight_diagnostics",
];

pub const DEFAULT_BUCKET_WIDTH: u64 = 1000;
pub const DEFAULT_GRID_CAP: u128 = 256;

fn canonical_key(key: &str) -> String {
    let key = key.trim().to_ascii_lowercase().replace('-', "_");
    match key.as_str() {
        "n" => "large_batch".into(),
        "b" => "small_batch".into(),
        "m" => "inner_len".into(),
        "episodes" => "max_episodes".into(),
        _ => key,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

impl Entry {
    fn err(&self, message: impl fmt::Display) -> HarnessError {
        HarnessError::parse(self.line, format!("{}: {message}", self.key))
    }

    pub fn parse<T: std::str::FromStr>(&self, what: &str) -> Result<T> {
        self.value.parse().map_err(|_| self.err(format!("expected {what}, got '{}'", self.value)))
    }

    pub fn bool(&self) -> Result<bool> {
        match self.value.to_ascii_lowercase().as_str() {
            "true" | "yes" | "on" | "1" => Ok(true),
            "false" | "no" | "off" | "0" => Ok(false),
            _ => Err(self.err(format!("expected true or false, got '{}'", self.value))),
        }
    }

    /// Comma-separated items, each trimmed; empty items are rejected.
    pub fn list(&self) -> Result<Vec<String>> {
        let items: Vec<String> = self.value.split(',').map(|s| s.trim().to_string()).collect();
        if items.iter().any(String::is_empty) {
            return Err(self.err("empty list item"));
        }
        Ok(items)
    }
}

/// Parsed `key = value` lines grouped by section, in file order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    sections: Vec<(String, Vec<Entry>)>,
    /// Directory relative paths inside the file are resolved against.
    base_dir: PathBuf,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ConfigFile::default();
        let mut current: Option<usize> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| HarnessError::parse(line, "section header is missing ']'"))?
                    .trim()
                    .to_ascii_lowercase();
                if !SECTIONS.contains(&name.as_str()) {
                    return Err(HarnessError::parse(
                        line,
                        format!("unknown section [{name}] (valid: {})", SECTIONS.join(", ")),
                    ));
                }
                if cfg.sections.iter().any(|(s, _)| *s == name) {
                    return Err(HarnessError::parse(line, format!("section [{name}] appears twice")));
                }
                cfg.sections.push((name, Vec::new()));
                current = Some(cfg.sections.len() - 1);
                continue;
            }
            let (key, value) =
                content.split_once('=').ok_or_else(|| HarnessError::parse(line, "expected 'key = value'"))?;
            let key = canonical_key(key);
            let value = value.trim().to_string();
            let idx =
                current.ok_or_else(|| HarnessError::parse(line, format!("'{key}' appears before any section")))?;
            let (section, entries) = &mut cfg.sections[idx];
            let allowed: &[&str] = match section.as_str() {
                "experiment" => &EXPERIMENT_KEYS,
                "policy" => &POLICY_KEYS,
                _ => &OPTIMIZER_KEYS,
            };
            if !(allowed.contains(&key.as_str()) || (section == "grid" && key == "cap")) {
                return Err(HarnessError::parse(line, format!("unknown key '{key}' in [{section}]")));
            }
            if value.is_empty() {
                return Err(HarnessError::parse(line, format!("'{key}' has no value")));
            }
            if entries.iter().any(|e| e.key == key) {
                return Err(HarnessError::parse(line, format!("'{key}' is set twice")));
            }
            entries.push(Entry { key, value, line });
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::File { path: path.into(), source })?;
        let mut cfg = Self::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn with_base_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.base_dir = dir.into();
        self
    }

    pub fn section(&self, name: &str) -> &[Entry] {
        self.sections.iter().find(|(s, _)| s == name).map_or(&[], |(_, e)| e.as_slice())
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&Entry> {
        self.section(section).iter().find(|e| e.key == key)
    }

    /// Sets or replaces a value, keeping the line of the entry it replaces.
    pub fn set(&mut self, section: &str, key: &str, value: &str, line: usize) {
        let idx = match self.sections.iter().position(|(s, _)| s == section) {
            Some(i) => i,
            None => {
                self.sections.push((section.to_string(), Vec::new()));
                self.sections.len() - 1
            }
        };
        let entries = &mut self.sections[idx].1;
        match entries.iter_mut().find(|e| e.key == key) {
            Some(e) => e.value = value.to_string(),
            None => entries.push(Entry { key: key.to_string(), value: value.to_string(), line }),
        }
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EnvSpec {
    CartPole,
    Acrobot,
    Tabular { name: String, mdp: TabularMdp },
}

impl EnvSpec {
    pub const NAMES: &'static str = "cartpole, acrobot, fixture:<name>, tabular:<path>";

    fn parse(entry: &Entry, base: &Path) -> Result<Self> {
        let value = entry.value.as_str();
        if let Some(name) = value.strip_prefix("fixture:") {
            let mdp = fixtures::by_name(name.trim()).ok_or_else(|| HarnessError::UnknownName {
                kind: "fixture",
                name: name.trim().into(),
                valid: fixtures::all().iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", "),
            })?;
            return Ok(EnvSpec::Tabular { name: value.into(), mdp });
        }
        if let Some(path) = value.strip_prefix("tabular:") {
            let path = base.join(path.trim());
            let mdp = TabularMdp::load(&path).map_err(|e| entry.err(format!("{}: {e}", path.display())))?;
            return Ok(EnvSpec::Tabular { name: value.into(), mdp });
        }
        match value.to_ascii_lowercase().as_str() {
            "cartpole" | "cart-pole" | "cart_pole" => Ok(EnvSpec::CartPole),
            "acrobot" => Ok(EnvSpec::Acrobot),
            _ => Err(HarnessError::UnknownName { kind: "environment", name: value.into(), valid: Self::NAMES.into() }),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            EnvSpec::CartPole => "cartpole",
            EnvSpec::Acrobot => "acrobot",
            EnvSpec::Tabular { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub env: EnvSpec,
    pub policy: PolicySpec,
    /// `iterations` may be 0 here, meaning an empty run.
    pub optimizer: OptimizerConfig,
    pub seed: u64,
    pub runs: usize,
    pub out_dir: Option<PathBuf>,
    pub bucket_width: u64,
    /// Fill the `ms` column with wall-clock time; otherwise it is 0 so that
    /// output files are reproducible byte for byte.
    pub timing: bool,
}

fn parse_switch(entry: &Entry) -> Result<SwitchSchedule> {
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| entry.err(format!("expected a probability, got '{s}'")));
    match entry.value.split_once("->") {
        Some((a, b)) => Ok(SwitchSchedule::LinearRamp { start: num(a)?, end: num(b)? }),
        None => Ok(SwitchSchedule::Constant(num(&entry.value)?)),
    }
}

fn parse_algorithm(entry: &Entry) -> Result<Algorithm> {
    entry.value.parse().map_err(|_| HarnessError::UnknownName {
        kind: "algorithm",
        name: entry.value.clone(),
        valid: Algorithm::ALL.iter().map(|a| a.name()).collect::<Vec<_>>().join(", "),
    })
}

impl RunConfig {
    pub fn from_file(cfg: &ConfigFile) -> Result<Self> {
        let exp = |k: &str| cfg.get("experiment", k);
        let opt = |k: &str| cfg.get("optimizer", k);
        let required = |section: &str, k: &str| {
            cfg.get(section, k).ok_or_else(|| HarnessError::Config(format!("[{section}] is missing '{k}'")))
        };

        let env = EnvSpec::parse(required("experiment", "env")?, cfg.base_dir())?;
        let seed = exp("seed").map(|e| e.parse("an unsigned integer")).transpose()?.unwrap_or(0);
        let runs = exp("runs").map(|e| e.parse("a run count")).transpose()?.unwrap_or(1usize);
        if runs == 0 {
            return Err(exp("runs").unwrap().err("need at least one run"));
        }
        let out_dir = exp("out_dir").map(|e| cfg.base_dir().join(&e.value));
        let bucket_width = exp("bucket_width").map(|e| e.parse("an episode count")).transpose()?;
        let bucket_width = bucket_width.unwrap_or(DEFAULT_BUCKET_WIDTH);
        if bucket_width == 0 {
            return Err(exp("bucket_width").unwrap().err("must be positive"));
        }
        let timing = exp("timing").map(Entry::bool).transpose()?.unwrap_or(false);

        let policy = Self::policy(cfg, &env)?;

        let algorithm = parse_algorithm(required("optimizer", "algorithm")?)?;
        let estimator = match opt("estimator") {
            Some(e) => e.value.parse::<EstimatorKind>().map_err(|_| HarnessError::UnknownName {
                kind: "estimator",
                name: e.value.clone(),
                valid: "reinforce, gpomdp".into(),
            })?,
            None => EstimatorKind::Gpomdp,
        };
        let eta = required("optimizer", "eta")?.parse("a step size")?;
        let gamma_entry = opt("gamma");
        let discount = match gamma_entry {
            Some(e) => {
                let g: f64 = e.parse("a discount factor")?;
                if g == 1.0 {
                    Discount::undiscounted()
                } else {
                    Discount::new(g).map_err(|err| e.err(err))?
                }
            }
            None => Discount::new(0.9999).expect("valid default"),
        };
        let max_episodes = opt("max_episodes").map(|e| e.parse("an episode count")).transpose()?;
        let iterations = match (opt("iterations"), max_episodes) {
            (Some(e), _) => e.parse("an iteration count")?,
            (None, Some(_)) => usize::MAX,
            (None, None) => {
                return Err(HarnessError::Config("[optimizer] needs 'iterations' or 'max_episodes'".into()))
            }
        };
        let mut optimizer = OptimizerConfig::new(algorithm, eta, discount, iterations);
        optimizer.estimator = estimator;
        optimizer.max_episodes = max_episodes;
        if let Some(e) = opt("large_batch") {
            optimizer.large_batch = e.parse("a batch size")?;
        }
        if let Some(e) = opt("small_batch") {
            optimizer.small_batch = e.parse("a batch size")?;
        }
        optimizer.inner_len = opt("inner_len").map(|e| e.parse("an inner-loop length")).transpose()?;
        optimizer.alpha = opt("alpha").map(|e| e.parse("a momentum weight")).transpose()?;
        optimizer.switch = opt("p").map(parse_switch).transpose()?;
        if let Some(e) = opt("thinning") {
            optimizer.thinning = e.parse("a positive integer")?;
        }
        optimizer.weight_clip = opt("weight_clip").map(|e| e.parse("a weight")).transpose()?;
        optimizer.weight_diagnostics = opt("weight_diagnostics").map(Entry::bool).transpose()?.unwrap_or(false);

        // An empty budget is legal; validate everything else as if it were not.
        let probe = OptimizerConfig { iterations: iterations.max(1), ..optimizer.clone() };
        probe.validate().map_err(|e| HarnessError::Config(format!("[optimizer] {e}")))?;

        Ok(RunConfig { env, policy, optimizer, seed, runs, out_dir, bucket_width, timing })
    }

    fn policy(cfg: &ConfigFile, env: &EnvSpec) -> Result<PolicySpec> {
        let kind = cfg.get("policy", "kind");
        let hidden = match cfg.get("policy", "hidden") {
            Some(e) => {
                let items = e.list()?;
                let sizes: Vec<usize> = items
                    .iter()
                    .map(|s| s.parse().ok().filter(|&n: &usize| n > 0))
                    .collect::<Option<_>>()
                    .ok_or_else(|| e.err("expected two positive layer widths"))?;
                <[usize; 2]>::try_from(sizes).map_err(|_| e.err("expected exactly two layer widths"))?
            }
            None => [32, 32],
        };
        let kind_name = kind.map(|e| e.value.to_ascii_lowercase());
        match (env, kind_name.as_deref()) {
            (EnvSpec::Tabular { mdp, .. }, None | Some("tabular")) => {
                Ok(PolicySpec::tabular(mdp.states(), mdp.actions()))
            }
            (EnvSpec::CartPole, None | Some("mlp")) => Ok(PolicySpec::Mlp(MlpSoftmax::new(4, hidden, 2))),
            (EnvSpec::Acrobot, None | Some("mlp")) => Ok(PolicySpec::Mlp(MlpSoftmax::new(6, hidden, 3))),
            (_, Some(k @ ("mlp" | "tabular"))) => {
                Err(kind.unwrap().err(format!("a {k} policy does not fit environment '{}'", env.name())))
            }
            (_, Some(other)) => {
                Err(HarnessError::UnknownName { kind: "policy", name: other.into(), valid: "mlp, tabular".into() })
            }
        }
    }

    /// True when the run performs no work at all.
    pub fn empty_budget(&self) -> bool {
        self.optimizer.iterations == 0 || self.optimizer.max_episodes == Some(0)
    }
}
