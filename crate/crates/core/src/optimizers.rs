//! GPOMDP, SVRPG, SRVRPG, STORM-PG and PAGE-PG as step-wise state machines.
//!
//! Every algorithm follows the same outer loop. An initial estimate v_0 is
//! built from `N` trajectories at θ_0; then for t = 0, 1, …:
//!
//! 1. θ_{t+1} = θ_t + η v_t
//! 2. a new estimate v_{t+1} is formed from trajectories sampled at θ_{t+1}:
//!
//! | algorithm | v_{t+1}                                                                 |
//! |-----------|-------------------------------------------------------------------------|
//! | GPOMDP    | mean over N fresh trajectories                                          |
//! | SVRPG     | ĝ_B(θ_{t+1}) + v_snap − ĝ^ω_B(θ_snap); every m updates a fresh N-batch snapshot |
//! | SRVRPG    | ĝ_B(θ_{t+1}) + v_t − ĝ^ω_B(θ_t); every m updates a fresh N-batch snapshot |
//! | STORM-PG  | ĝ_B(θ_{t+1}) + (1−α)(v_t − ĝ^ω_B(θ_t))                                  |
//! | PAGE-PG   | with probability p: mean over N fresh trajectories; else as SRVRPG's inner step |
//!
//! where ĝ_B(θ) is the mean on-policy contribution over the B new trajectories
//! and ĝ^ω_B(θ') the mean importance-weighted contribution at θ' over the same
//! trajectories. The correction `small + scale · (anchor − off)` is evaluated
//! with one expression for all algorithms, so the reductions
//! STORM-PG(α=0) ≡ SRVRPG and PAGE-PG(p=1) ≡ GPOMDP hold bit for bit.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{contribution, mean_vector, offpolicy_contribution, EstimatorKind, WeightReport, WeightStats};
use crate::mdp::{Discount, Environment, Sampler, Trajectory};
use crate::policy::{ParamVector, Policy};
use crate::rng::{Purpose, SeedTree, StreamRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    /// Plain stochastic gradient ascent with N-batch estimates.
    Gpomdp,
    Svrpg,
    Srvrpg,
    StormPg,
    PagePg,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] =
        [Algorithm::Gpomdp, Algorithm::Svrpg, Algorithm::Srvrpg, Algorithm::StormPg, Algorithm::PagePg];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Gpomdp => "gpomdp",
            Algorithm::Svrpg => "svrpg",
            Algorithm::Srvrpg => "srvrpg",
            Algorithm::StormPg => "storm-pg",
            Algorithm::PagePg => "page-pg",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        Algorithm::ALL.into_iter().find(|a| a.name() == key || a.name().replace('-', "") == key).ok_or_else(|| {
            let names: Vec<_> = Algorithm::ALL.iter().map(|a| a.name()).collect();
            Error::argument(format!("unknown algorithm '{s}' (valid: {})", names.join(", ")))
        })
    }
}

/// Switch probability p_t of PAGE-PG.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SwitchSchedule {
    Constant(f64),
    /// Linear interpolation from `start` to `end` over the run's budget.
    LinearRamp {
        start: f64,
        end: f64,
    },
}

impl SwitchSchedule {
    /// p at `progress` ∈ [0, 1].
    pub fn at(&self, progress: f64) -> f64 {
        match *self {
            SwitchSchedule::Constant(p) => p,
            SwitchSchedule::LinearRamp { start, end } => start + (end - start) * progress.clamp(0.0, 1.0),
        }
    }

    fn endpoints(&self) -> [f64; 2] {
        match *self {
            SwitchSchedule::Constant(p) => [p, p],
            SwitchSchedule::LinearRamp { start, end } => [start, end],
        }
    }
}

/// Hyperparameters of one optimisation run.
///
/// `inner_len` is required by SVRPG/SRVRPG only, `alpha` by STORM-PG only and
/// `switch` by PAGE-PG only; supplying them to other algorithms is an error.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub algorithm: Algorithm,
    pub estimator: EstimatorKind,
    /// Step size η.
    pub eta: f64,
    /// N: initial, snapshot and full-branch batch size.
    pub large_batch: usize,
    /// B: correction batch size.
    pub small_batch: usize,
    /// m: updates per epoch.
    pub inner_len: Option<usize>,
    /// α of STORM-PG.
    pub alpha: Option<f64>,
    /// p_t of PAGE-PG.
    pub switch: Option<SwitchSchedule>,
    pub discount: Discount,
    /// T: maximum number of parameter updates.
    pub iterations: usize,
    /// Stop before an update once this many trajectories have been drawn.
    pub max_episodes: Option<u64>,
    /// Keep every k-th iterate for output selection.
    pub thinning: usize,
    /// Clip importance weights at this value (off by default).
    pub weight_clip: Option<f64>,
    /// Record importance-weight statistics of every correction batch.
    pub weight_diagnostics: bool,
    /// Admit α ∈ {0, 1} and p = 0, for reduction checks.
    pub allow_degenerate: bool,
}

impl OptimizerConfig {
    /// A configuration with N = 100, B = 5, GPOMDP contributions and
    /// no algorithm-specific parameters set.
    pub fn new(algorithm: Algorithm, eta: f64, discount: Discount, iterations: usize) -> Self {
        OptimizerConfig {
            algorithm,
            estimator: EstimatorKind::Gpomdp,
            eta,
            large_batch: 100,
            small_batch: 5,
            inner_len: None,
            alpha: None,
            switch: None,
            discount,
            iterations,
            max_episodes: None,
            thinning: 1,
            weight_clip: None,
            weight_diagnostics: false,
            allow_degenerate: false,
        }
    }

    pub fn batches(mut self, large: usize, small: usize) -> Self {
        self.large_batch = large;
        self.small_batch = small;
        self
    }

    pub fn inner_len(mut self, m: usize) -> Self {
        self.inner_len = Some(m);
        self
    }

    pub fn alpha(mut self, alpha: f64) -> Self {
        self.alpha = Some(alpha);
        self
    }

    pub fn switch(mut self, schedule: SwitchSchedule) -> Self {
        self.switch = Some(schedule);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let arg = |msg: String| Err(Error::argument(msg));
        if !(self.eta.is_finite() && self.eta >= 0.0) {
            return arg(format!("step size must be finite and non-negative, got {}", self.eta));
        }
        if self.iterations == 0 {
            return arg("iteration budget must be at least 1".into());
        }
        if self.large_batch == 0 {
            return arg("large batch N must be at least 1".into());
        }
        if self.thinning == 0 {
            return arg("thinning must be at least 1".into());
        }
        if let Some(c) = self.weight_clip {
            if c.is_nan() || c <= 0.0 {
                return arg(format!("weight clip must be positive, got {c}"));
            }
        }
        let algo = self.algorithm;
        let loopy = matches!(algo, Algorithm::Svrpg | Algorithm::Srvrpg);
        let uses_small = !matches!(algo, Algorithm::Gpomdp);
        if uses_small && (self.small_batch == 0 || self.small_batch > self.large_batch) {
            return arg(format!("need 1 ≤ B ≤ N, got B = {}, N = {}", self.small_batch, self.large_batch));
        }
        match (loopy, self.inner_len) {
            (true, None) => return arg(format!("{algo} needs an inner-loop length m")),
            (true, Some(0)) => return arg("inner-loop length m must be at least 1".into()),
            (false, Some(_)) => return arg(format!("{algo} takes no inner-loop length")),
            _ => {}
        }
        match (algo == Algorithm::StormPg, self.alpha) {
            (true, None) => return arg("storm-pg needs alpha".into()),
            (true, Some(a)) => {
                let ok = if self.allow_degenerate { (0.0..=1.0).contains(&a) } else { a > 0.0 && a < 1.0 };
                if !ok {
                    return arg(format!("alpha must lie in (0, 1), got {a}"));
                }
            }
            (false, Some(_)) => return arg(format!("{algo} takes no alpha")),
            (false, None) => {}
        }
        match (algo == Algorithm::PagePg, self.switch) {
            (true, None) => return arg("page-pg needs a switch probability p".into()),
            (true, Some(s)) => {
                for p in s.endpoints() {
                    let ok = if self.allow_degenerate { (0.0..=1.0).contains(&p) } else { p > 0.0 && p <= 1.0 };
                    if !ok {
                        return arg(format!("switch probability must lie in (0, 1], got {p}"));
                    }
                }
            }
            (false, Some(_)) => return arg(format!("{algo} takes no switch probability")),
            (false, None) => {}
        }
        Ok(())
    }
}

/// Which kind of estimate a log row records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    /// Fresh N-batch estimate (initial estimate, GPOMDP, PAGE-PG full branch).
    Full,
    /// Small-batch recursive estimate (STORM-PG, PAGE-PG small branch).
    Small,
    /// Inner-loop estimate of SVRPG/SRVRPG.
    Inner,
    /// Epoch snapshot of SVRPG/SRVRPG.
    Snapshot,
    /// The estimate was not finite; the run stopped.
    Diverged,
}

impl Branch {
    pub fn name(self) -> &'static str {
        match self {
            Branch::Full => "full",
            Branch::Small => "small",
            Branch::Inner => "inner",
            Branch::Snapshot => "snapshot",
            Branch::Diverged => "diverged",
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One estimate v_t, computed after `iteration` parameter updates.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateRow {
    pub iteration: u64,
    pub branch: Branch,
    pub episodes_used: u64,
    pub cum_episodes: u64,
    pub v_norm: f64,
    /// Mean undiscounted return of the trajectories drawn for this estimate.
    pub avg_return: f64,
    pub weights: Option<WeightStats>,
}

/// Append-only record of every estimate of a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterateLog {
    rows: Vec<IterateRow>,
}

impl IterateLog {
    pub fn rows(&self) -> &[IterateRow] {
        &self.rows
    }

    pub fn last(&self) -> Option<&IterateRow> {
        self.rows.last()
    }

    fn push(&mut self, row: IterateRow) {
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    /// Current iterate θ_t.
    pub theta: ParamVector,
    /// Current estimate v_t.
    pub v: ParamVector,
    /// Updates performed so far.
    pub iteration: u64,
    /// Updates since the last snapshot (SVRPG/SRVRPG).
    pub inner: usize,
    pub episodes: u64,
    /// Next trajectory batch counter.
    pub cursor: u64,
    pub diverged: bool,
}

/// Result of a complete run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub state: OptimizerState,
    pub log: IterateLog,
    /// Stored iterates `(t, θ_t)` for t = k, 2k, … (k = thinning).
    pub iterates: Vec<(u64, ParamVector)>,
}

impl RunOutput {
    /// Uniformly drawn output iterate.
    pub fn select_output(&self, rng: &mut StreamRng) -> Result<ParamVector> {
        let thetas: Vec<ParamVector> = self.iterates.iter().map(|(_, t)| t.clone()).collect();
        select_output(&thetas, rng)
    }
}

/// Uniform draw over stored iterates.
pub fn select_output(iterates: &[ParamVector], rng: &mut StreamRng) -> Result<ParamVector> {
    if iterates.is_empty() {
        return Err(Error::argument("no iterates to choose from"));
    }
    Ok(iterates[rng.gen_range(0..iterates.len())].clone())
}

struct Estimate {
    v: ParamVector,
    branch: Branch,
    avg_return: f64,
    weights: Option<WeightStats>,
}

/// A single optimisation run, advanced one update at a time.
pub struct Optimizer<'a, E: ?Sized, P: ?Sized> {
    env: &'a E,
    policy: &'a P,
    cfg: OptimizerConfig,
    sampler: Sampler,
    state: OptimizerState,
    /// θ and v of the last snapshot (SVRPG).
    snapshot: Option<(ParamVector, ParamVector)>,
    log: IterateLog,
    iterates: Vec<(u64, ParamVector)>,
}

fn mean_return(trajs: &[Trajectory]) -> f64 {
    trajs.iter().map(Trajectory::total_reward).sum::<f64>() / trajs.len() as f64
}

/// `small + scale · (anchor − off)`, element-wise.
fn corrected(small: &ParamVector, anchor: &ParamVector, off: &ParamVector, scale: f64) -> ParamVector {
    ParamVector::from_vec(
        small.iter().zip(anchor.iter()).zip(off.iter()).map(|((s, a), o)| s + scale * (a - o)).collect(),
    )
}

impl<'a, E, P> Optimizer<'a, E, P>
where
    E: Environment + ?Sized,
    P: Policy + ?Sized,
{
    /// Validates the configuration and computes the initial estimate v_0.
    pub fn new(env: &'a E, policy: &'a P, theta0: ParamVector, cfg: OptimizerConfig, seeds: SeedTree) -> Result<Self> {
        cfg.validate()?;
        policy.check_params(&theta0)?;
        let dim = theta0.len();
        let mut opt = Optimizer {
            env,
            policy,
            cfg,
            sampler: Sampler::new(seeds),
            state: OptimizerState {
                theta: theta0,
                v: ParamVector::zeros(dim),
                iteration: 0,
                inner: 0,
                episodes: 0,
                cursor: 0,
                diverged: false,
            },
            snapshot: None,
            log: IterateLog::default(),
            iterates: Vec::new(),
        };
        let initial = opt.full_estimate().map(|mut est| {
            if matches!(opt.cfg.algorithm, Algorithm::Svrpg | Algorithm::Srvrpg) {
                est.branch = Branch::Snapshot;
            }
            est
        });
        opt.record(initial)?;
        if opt.cfg.algorithm == Algorithm::Svrpg && !opt.state.diverged {
            opt.snapshot = Some((opt.state.theta.clone(), opt.state.v.clone()));
        }
        Ok(opt)
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.cfg
    }

    pub fn state(&self) -> &OptimizerState {
        &self.state
    }

    pub fn log(&self) -> &IterateLog {
        &self.log
    }

    /// Whether another update is allowed by the budgets.
    pub fn can_step(&self) -> bool {
        !self.state.diverged
            && (self.state.iteration as usize) < self.cfg.iterations
            && self.cfg.max_episodes.is_none_or(|max| self.state.episodes < max)
    }

    /// Performs θ_{t+1} = θ_t + η v_t and computes v_{t+1}. Returns the new log
    /// row, or `None` once the budget is spent or the run has diverged.
    pub fn step(&mut self) -> Result<Option<&IterateRow>> {
        if !self.can_step() {
            return Ok(None);
        }
        let previous = self.state.theta.clone();
        self.state.theta.axpy(self.cfg.eta, &self.state.v);
        self.state.iteration += 1;
        let t = self.state.iteration;
        if t.is_multiple_of(self.cfg.thinning as u64) {
            self.iterates.push((t, self.state.theta.clone()));
        }

        let estimate = match self.cfg.algorithm {
            Algorithm::Gpomdp => self.full_estimate(),
            Algorithm::Svrpg | Algorithm::Srvrpg => {
                self.state.inner += 1;
                if self.state.inner == self.cfg.inner_len.unwrap_or(1) {
                    self.state.inner = 0;
                    self.full_estimate().map(|mut est| {
                        est.branch = Branch::Snapshot;
                        est
                    })
                } else if self.cfg.algorithm == Algorithm::Svrpg {
                    let (snap_theta, snap_v) = self.snapshot.clone().expect("snapshot taken before inner steps");
                    self.corrected_estimate(&snap_theta, &snap_v, 1.0, Branch::Inner)
                } else {
                    let v = self.state.v.clone();
                    self.corrected_estimate(&previous, &v, 1.0, Branch::Inner)
                }
            }
            Algorithm::StormPg => {
                let v = self.state.v.clone();
                let scale = 1.0 - self.cfg.alpha.unwrap_or(0.0);
                self.corrected_estimate(&previous, &v, scale, Branch::Small)
            }
            Algorithm::PagePg => {
                let u: f64 = self.sampler.seeds().stream(Purpose::Branch, t, 0).gen();
                if u < self.switch_probability() {
                    self.full_estimate()
                } else {
                    let v = self.state.v.clone();
                    self.corrected_estimate(&previous, &v, 1.0, Branch::Small)
                }
            }
        };
        self.record(estimate)?;
        if self.cfg.algorithm == Algorithm::Svrpg && self.state.inner == 0 && !self.state.diverged {
            self.snapshot = Some((self.state.theta.clone(), self.state.v.clone()));
        }
        Ok(self.log.last())
    }

    /// Runs until the budget is spent or the estimate diverges.
    pub fn run_to_end(mut self) -> Result<RunOutput> {
        while self.step()?.is_some() {}
        Ok(self.finish())
    }

    pub fn finish(self) -> RunOutput {
        RunOutput { state: self.state, log: self.log, iterates: self.iterates }
    }

    /// Run progress in [0, 1]: episode fraction when an episode budget is set,
    /// else update fraction.
    fn switch_probability(&self) -> f64 {
        let schedule = self.cfg.switch.unwrap_or(SwitchSchedule::Constant(1.0));
        let progress = match self.cfg.max_episodes {
            Some(max) => self.state.episodes as f64 / max as f64,
            None if self.cfg.iterations > 1 => (self.state.iteration - 1) as f64 / (self.cfg.iterations - 1) as f64,
            None => 0.0,
        };
        schedule.at(progress)
    }

    fn draw(&mut self, n: usize) -> Result<Vec<Trajectory>> {
        let trajs = self.sampler.draw(self.env, self.policy, &self.state.theta, n)?;
        self.state.cursor = self.sampler.cursor();
        self.state.episodes = self.sampler.episodes();
        Ok(trajs)
    }

    fn on_policy_mean(&self, trajs: &[Trajectory]) -> Result<ParamVector> {
        let (kind, policy, theta, disc) = (self.cfg.estimator, self.policy, &self.state.theta, self.cfg.discount);
        let contribs =
            trajs.par_iter().map(|t| contribution(kind, policy, theta, t, disc)).collect::<Result<Vec<_>>>()?;
        mean_vector(&contribs)
    }

    fn full_estimate(&mut self) -> Result<Estimate> {
        let trajs = self.draw(self.cfg.large_batch)?;
        Ok(Estimate {
            v: self.on_policy_mean(&trajs)?,
            branch: Branch::Full,
            avg_return: mean_return(&trajs),
            weights: None,
        })
    }

    /// ĝ_B(θ) + scale · (anchor_v − ĝ^ω_B(anchor_theta)) on B fresh trajectories at θ.
    fn corrected_estimate(
        &mut self,
        anchor_theta: &ParamVector,
        anchor_v: &ParamVector,
        scale: f64,
        branch: Branch,
    ) -> Result<Estimate> {
        let trajs = self.draw(self.cfg.small_batch)?;
        let small = self.on_policy_mean(&trajs)?;
        let (kind, policy, theta, disc, clip) =
            (self.cfg.estimator, self.policy, &self.state.theta, self.cfg.discount, self.cfg.weight_clip);
        let off = trajs
            .par_iter()
            .map(|t| offpolicy_contribution(kind, policy, anchor_theta, theta, t, disc, clip))
            .collect::<Result<Vec<_>>>()?;
        let off = mean_vector(&off)?;
        let weights = if self.cfg.weight_diagnostics {
            Some(WeightReport::compute(policy, anchor_theta, theta, &trajs)?.stats)
        } else {
            None
        };
        Ok(Estimate { v: corrected(&small, anchor_v, &off, scale), branch, avg_return: mean_return(&trajs), weights })
    }

    /// Logs an estimate and installs it as v. Numeric failures and non-finite
    /// estimates end the run with a `diverged` row.
    fn record(&mut self, estimate: Result<Estimate>) -> Result<()> {
        let before = self.log.last().map_or(0, |r| r.cum_episodes);
        self.state.episodes = self.sampler.episodes();
        self.state.cursor = self.sampler.cursor();
        let used = self.state.episodes - before;
        let row = match estimate {
            Ok(est) if est.v.is_finite() => {
                let row = IterateRow {
                    iteration: self.state.iteration,
                    branch: est.branch,
                    episodes_used: used,
                    cum_episodes: self.state.episodes,
                    v_norm: est.v.norm(),
                    avg_return: est.avg_return,
                    weights: est.weights,
                };
                self.state.v = est.v;
                row
            }
            Ok(est) => {
                self.state.diverged = true;
                IterateRow {
                    iteration: self.state.iteration,
                    branch: Branch::Diverged,
                    episodes_used: used,
                    cum_episodes: self.state.episodes,
                    v_norm: f64::NAN,
                    avg_return: est.avg_return,
                    weights: est.weights,
                }
            }
            Err(Error::Numeric { .. }) => {
                self.state.diverged = true;
                IterateRow {
                    iteration: self.state.iteration,
                    branch: Branch::Diverged,
                    episodes_used: used,
                    cum_episodes: self.state.episodes,
                    v_norm: f64::NAN,
                    avg_return: f64::NAN,
                    weights: None,
                }
            }
            Err(e) => return Err(e),
        };
        self.log.push(row);
        Ok(())
    }
}

/// Runs `cfg.algorithm` from `theta0` to the end of its budget.
pub fn run<E, P>(env: &E, policy: &P, theta0: ParamVector, cfg: OptimizerConfig, seeds: SeedTree) -> Result<RunOutput>
where
    E: Environment + ?Sized,
    P: Policy + ?Sized,
{
    Optimizer::new(env, policy, theta0, cfg, seeds)?.run_to_end()
}

macro_rules! named_run {
    ($(#[$doc:meta])* $name:ident, $algo:expr) => {
        $(#[$doc])*
        pub fn $name<E, P>(
            env: &E,
            policy: &P,
            theta0: ParamVector,
            cfg: OptimizerConfig,
            seeds: SeedTree,
        ) -> Result<RunOutput>
        where
            E: Environment + ?Sized,
            P: Policy + ?Sized,
        {
            run(env, policy, theta0, OptimizerConfig { algorithm: $algo, ..cfg }, seeds)
        }
    };
}

named_run!(
    /// GPOMDP ascent with an N-batch estimate at every iterate.
    vanilla_run,
    Algorithm::Gpomdp
);
named_run!(
    /// SVRPG: inner corrections anchored to the epoch snapshot.
    svrpg_run,
    Algorithm::Svrpg
);
named_run!(
    /// SRVRPG: inner corrections anchored to the previous iterate.
    srvrpg_run,
    Algorithm::Srvrpg
);
named_run!(
    /// STORM-PG: single loop with momentum-discounted recursive corrections.
    storm_pg_run,
    Algorithm::StormPg
);
named_run!(
    /// PAGE-PG: probabilistic switch between a fresh N-batch and a recursive
    /// small-batch correction.
    page_pg_run,
    Algorithm::PagePg
);

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::TabularMdp;
    use crate::policy::TabularSoftmax;

    fn bandit() -> TabularMdp {
        TabularMdp::new(vec![1.0], vec![vec![1.0], vec![1.0]], vec![vec![1.0, 0.0]], 1, None).unwrap()
    }

    fn disc() -> Discount {
        Discount::new(0.9).unwrap()
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert_eq!("PAGE_PG".parse::<Algorithm>().unwrap(), Algorithm::PagePg);
        assert_eq!("stormpg".parse::<Algorithm>().unwrap(), Algorithm::StormPg);
        let err = "adam".parse::<Algorithm>().unwrap_err().to_string();
        assert!(err.contains("page-pg") && err.contains("gpomdp"));
    }

    #[test]
    fn validation_requires_exactly_the_needed_fields() {
        let base = |a| OptimizerConfig::new(a, 0.1, disc(), 10).batches(10, 2);
        assert!(base(Algorithm::Gpomdp).validate().is_ok());
        assert!(base(Algorithm::Svrpg).validate().is_err());
        assert!(base(Algorithm::Svrpg).inner_len(0).validate().is_err());
        assert!(base(Algorithm::Svrpg).inner_len(3).validate().is_ok());
        assert!(base(Algorithm::Gpomdp).inner_len(3).validate().is_err());
        assert!(base(Algorithm::StormPg).validate().is_err());
        assert!(base(Algorithm::StormPg).alpha(1.0).validate().is_err());
        assert!(base(Algorithm::StormPg).alpha(0.0).validate().is_err());
        assert!(base(Algorithm::StormPg).alpha(0.5).validate().is_ok());
        let degenerate = OptimizerConfig { allow_degenerate: true, ..base(Algorithm::StormPg).alpha(1.0) };
        assert!(degenerate.validate().is_ok());
        assert!(base(Algorithm::PagePg).switch(SwitchSchedule::Constant(0.0)).validate().is_err());
        assert!(base(Algorithm::PagePg).switch(SwitchSchedule::Constant(1.0)).validate().is_ok());
        assert!(base(Algorithm::PagePg).switch(SwitchSchedule::Constant(1.5)).validate().is_err());
        assert!(base(Algorithm::PagePg)
            .switch(SwitchSchedule::LinearRamp { start: 0.01, end: 0.4 })
            .validate()
            .is_ok());
        assert!(base(Algorithm::StormPg).alpha(0.5).batches(2, 3).validate().is_err());
        assert!(OptimizerConfig::new(Algorithm::Gpomdp, 0.1, disc(), 0).validate().is_err());
    }

    #[test]
    fn zero_step_size_never_moves_theta() {
        let mdp = bandit();
        let pol = TabularSoftmax::new(1, 2);
        let theta0 = ParamVector::from_vec(vec![0.2, -0.3]);
        let cfg = OptimizerConfig::new(Algorithm::Gpomdp, 0.0, disc(), 20).batches(4, 4);
        let out = vanilla_run(&mdp, &pol, theta0.clone(), cfg, SeedTree::new(1)).unwrap();
        assert!(out.iterates.iter().all(|(_, t)| *t == theta0));
        assert_eq!(out.state.theta, theta0);
    }

    #[test]
    fn svrpg_and_srvrpg_agree_with_two_step_epochs() {
        // With m = 2 each epoch has one inner estimate, anchored at θ_0^s and
        // v_0^s in both algorithms.
        let mdp = crate::fixtures::by_name("two_state_chain").unwrap();
        let pol = TabularSoftmax::new(2, 2);
        let cfg = |a| OptimizerConfig::new(a, 0.5, disc(), 9).batches(8, 3).inner_len(2);
        let a = svrpg_run(&mdp, &pol, ParamVector::zeros(4), cfg(Algorithm::Svrpg), SeedTree::new(5)).unwrap();
        let b = srvrpg_run(&mdp, &pol, ParamVector::zeros(4), cfg(Algorithm::Srvrpg), SeedTree::new(5)).unwrap();
        assert_eq!(a.iterates, b.iterates);
        assert_eq!(a.log, b.log);
    }

    #[test]
    fn svrpg_with_unit_epochs_is_vanilla() {
        let mdp = crate::fixtures::by_name("three_state_loop").unwrap();
        let pol = TabularSoftmax::new(3, 2);
        let svrpg = OptimizerConfig::new(Algorithm::Svrpg, 0.3, disc(), 6).batches(7, 2).inner_len(1);
        let vanilla = OptimizerConfig::new(Algorithm::Gpomdp, 0.3, disc(), 6).batches(7, 2);
        let a = run(&mdp, &pol, ParamVector::zeros(6), svrpg, SeedTree::new(2)).unwrap();
        let b = run(&mdp, &pol, ParamVector::zeros(6), vanilla, SeedTree::new(2)).unwrap();
        assert_eq!(a.iterates, b.iterates);
        assert!(a.log.rows().iter().all(|r| r.branch == Branch::Snapshot));
    }

    #[test]
    fn srvrpg_with_frozen_theta_keeps_estimate() {
        let mdp = crate::fixtures::by_name("two_state_chain").unwrap();
        let pol = TabularSoftmax::new(2, 2);
        let cfg = OptimizerConfig::new(Algorithm::Srvrpg, 0.0, disc(), 4).batches(10, 3).inner_len(5);
        let mut opt =
            Optimizer::new(&mdp, &pol, ParamVector::from_vec(vec![0.1, 0.4, -0.2, 0.3]), cfg, SeedTree::new(4))
                .unwrap();
        let v0 = opt.state().v.clone();
        for _ in 0..4 {
            opt.step().unwrap();
            // small − off cancels exactly when the weights are all one.
            assert!(opt.state().v.max_abs_diff(&v0) < 1e-15);
        }
    }

    #[test]
    fn episode_accounting_matches_rows() {
        let mdp = crate::fixtures::by_name("three_action_grid").unwrap();
        let pol = TabularSoftmax::new(3, 3);
        for algo in Algorithm::ALL {
            let mut cfg = OptimizerConfig::new(algo, 0.2, disc(), 25).batches(9, 2);
            match algo {
                Algorithm::Svrpg | Algorithm::Srvrpg => cfg = cfg.inner_len(4),
                Algorithm::StormPg => cfg = cfg.alpha(0.7),
                Algorithm::PagePg => cfg = cfg.switch(SwitchSchedule::Constant(0.3)),
                Algorithm::Gpomdp => {}
            }
            let out = run(&mdp, &pol, ParamVector::zeros(9), cfg, SeedTree::new(11)).unwrap();
            let rows = out.log.rows();
            let total: u64 = rows.iter().map(|r| r.episodes_used).sum();
            assert_eq!(total, out.state.episodes, "{algo}");
            assert!(rows.windows(2).all(|w| w[1].cum_episodes >= w[0].cum_episodes));
            assert_eq!(out.state.iteration, 25);
            assert_eq!(out.iterates.len(), 25);
        }
    }

    #[test]
    fn episode_budget_stops_the_run() {
        let mdp = bandit();
        let pol = TabularSoftmax::new(1, 2);
        let mut cfg = OptimizerConfig::new(Algorithm::Gpomdp, 0.1, disc(), 1000).batches(10, 10);
        cfg.max_episodes = Some(55);
        let out = run(&mdp, &pol, ParamVector::zeros(2), cfg, SeedTree::new(0)).unwrap();
        assert_eq!(out.state.episodes, 60);
        assert_eq!(out.state.iteration, 5);
    }

    #[test]
    fn thinning_keeps_every_kth_iterate() {
        let mdp = bandit();
        let pol = TabularSoftmax::new(1, 2);
        let mut cfg = OptimizerConfig::new(Algorithm::Gpomdp, 0.1, disc(), 10).batches(3, 3);
        cfg.thinning = 3;
        let out = run(&mdp, &pol, ParamVector::zeros(2), cfg, SeedTree::new(0)).unwrap();
        let ts: Vec<u64> = out.iterates.iter().map(|(t, _)| *t).collect();
        assert_eq!(ts, vec![3, 6, 9]);
    }

    #[test]
    fn divergence_stops_with_a_diagnostic_row() {
        let mdp = bandit();
        let pol = TabularSoftmax::new(1, 2);
        let cfg = OptimizerConfig::new(Algorithm::Gpomdp, 0.1, disc(), 50).batches(2, 2);
        let mut opt = Optimizer::new(&mdp, &pol, ParamVector::zeros(2), cfg.clone(), SeedTree::new(3)).unwrap();
        let nan = Estimate {
            v: ParamVector::from_vec(vec![f64::NAN, 0.0]),
            branch: Branch::Full,
            avg_return: 1.0,
            weights: None,
        };
        opt.record(Ok(nan)).unwrap();
        assert!(opt.state().diverged);
        assert_eq!(opt.log().last().unwrap().branch, Branch::Diverged);
        assert!(opt.state().v.is_finite());
        assert!(opt.step().unwrap().is_none());

        let mut opt = Optimizer::new(&mdp, &pol, ParamVector::zeros(2), cfg, SeedTree::new(3)).unwrap();
        opt.record(Err(Error::numeric(Some(1), "weight overflow"))).unwrap();
        assert!(opt.state().diverged);
        assert!(opt.record(Err(Error::argument("other"))).is_err());
    }

    #[test]
    fn select_output_cases() {
        let mut rng = SeedTree::new(0).stream(Purpose::Output, 0, 0);
        let one = ParamVector::from_vec(vec![1.0]);
        assert_eq!(select_output(std::slice::from_ref(&one), &mut rng).unwrap(), one);
        assert!(select_output(&[], &mut rng).is_err());
    }

    #[test]
    fn ramp_schedule_interpolates() {
        let s = SwitchSchedule::LinearRamp { start: 0.01, end: 0.4 };
        assert_eq!(s.at(0.0), 0.01);
        assert_eq!(s.at(1.0), 0.4);
        assert!((s.at(0.5) - 0.205).abs() < 1e-15);
        assert_eq!(s.at(2.0), 0.4);
    }
}
