//! Invariant suites run against the shipped fixtures.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use vrpg_core::analysis::{average_samples, exact_value, Enumerator};
use vrpg_core::envs::{CartPole, TabularMdp};
use vrpg_core::estimators::{contribution, offpolicy_contribution, EstimatorKind};
use vrpg_core::fixtures;
use vrpg_core::mdp::{sample_batch, Discount, Environment, Observation, Trajectory};
use vrpg_core::optimizers::{run, Algorithm, OptimizerConfig, RunOutput, SwitchSchedule};
use vrpg_core::policy::{MlpSoftmax, ParamVector, Policy, PolicySpec, TabularSoftmax};
use vrpg_core::rng::{Purpose, SeedTree, StreamRng};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Gradients,
    Unbiasedness,
    Variance,
    Reductions,
    Accounting,
}

impl Suite {
    pub const ALL: [Suite; 5] =
        [Suite::Gradients, Suite::Unbiasedness, Suite::Variance, Suite::Reductions, Suite::Accounting];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Gradients => "gradients",
            Suite::Unbiasedness => "unbiasedness",
            Suite::Variance => "variance",
            Suite::Reductions => "reductions",
            Suite::Accounting => "accounting",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL.into_iter().find(|x| x.name() == s.trim().to_ascii_lowercase()).ok_or_else(|| {
            HarnessError::UnknownName {
                kind: "suite",
                name: s.into(),
                valid: Suite::ALL.iter().map(|x| x.name()).collect::<Vec<_>>().join(", "),
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub suite: Suite,
    pub name: String,
    pub passed: bool,
    /// Observed value against its threshold.
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag}  {:<12}  {:<44}  {}", self.suite.name(), self.name, self.detail)
    }
}

/// Sizes of the statistical checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Trajectories per Monte-Carlo mean.
    pub mc_samples: usize,
    /// Seeded PAGE-PG runs in the accounting suite.
    pub accounting_runs: usize,
    pub accounting_iterations: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { seed: 0, mc_samples: 100_000, accounting_runs: 200, accounting_iterations: 200 }
    }
}

pub fn run_suite(suite: Suite, opts: &VerifyOptions) -> Result<Vec<Check>> {
    match suite {
        Suite::Gradients => gradients(opts),
        Suite::Unbiasedness => unbiasedness(opts),
        Suite::Variance => variance(opts),
        Suite::Reductions => reductions(opts),
        Suite::Accounting => accounting(opts),
    }
}

fn check(suite: Suite, name: impl Into<String>, passed: bool, detail: String) -> Check {
    Check { suite, name: name.into(), passed, detail }
}

fn random_vector(rng: &mut StreamRng, d: usize, scale: f64) -> ParamVector {
    ParamVector::from_vec((0..d).map(|_| rng.gen_range(-scale..scale)).collect())
}

/// Central differences of `f` at `theta`, one coordinate at a time.
pub fn finite_difference(f: impl Fn(&ParamVector) -> f64, theta: &ParamVector, h: f64) -> ParamVector {
    let mut probe = theta.clone();
    let mut out = ParamVector::zeros(theta.len());
    for i in 0..theta.len() {
        probe[i] = theta[i] + h;
        let up = f(&probe);
        probe[i] = theta[i] - h;
        let down = f(&probe);
        probe[i] = theta[i];
        out[i] = (up - down) / (2.0 * h);
    }
    out
}

/// Finite-difference and score-identity checks at 20 random (θ, s, a)
/// triples, split between the CartPole and Acrobot network shapes.
pub fn gradients(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let suite = Suite::Gradients;
    let tree = SeedTree::new(opts.seed);
    let mut checks = Vec::new();
    for (shape, (input, actions)) in [("cartpole", (4, 2)), ("acrobot", (6, 3))] {
        let policy = MlpSoftmax::new(input, [32, 32], actions);
        for trial in 0..10u64 {
            let mut rng = tree.stream(Purpose::Auxiliary, input as u64, trial);
            let mut theta = policy.init_params(&mut rng);
            for v in theta.as_mut_slice() {
                *v += rng.gen_range(-0.5..0.5);
            }
            let obs = Observation::Continuous((0..input).map(|_| rng.gen_range(-2.0..2.0)).collect());
            let a = rng.gen_range(0..actions);
            let analytic = policy.grad_log_prob(&theta, &obs, a)?;
            let numeric = finite_difference(|t| policy.log_prob(t, &obs, a).unwrap_or(f64::NAN), &theta, 1e-5);
            let rel = analytic.sub(&numeric).norm() / analytic.norm().max(numeric.norm()).max(1e-12);
            checks.push(check(
                suite,
                format!("mlp {shape} #{trial} finite difference"),
                rel < 1e-4,
                format!("relative error {rel:.3e} (< 1e-4)"),
            ));

            let pi = policy.action_distribution(&theta, &obs)?;
            let mut total = ParamVector::zeros(theta.len());
            for (b, p) in pi.iter().enumerate() {
                total.axpy(*p, &policy.grad_log_prob(&theta, &obs, b)?);
            }
            let worst = total.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            checks.push(check(
                suite,
                format!("mlp {shape} #{trial} score identity"),
                worst < 1e-10,
                format!("max |Σ π ∇log π| {worst:.3e} (< 1e-10)"),
            ));
        }
    }
    for (name, mdp) in fixtures::all() {
        let policy = TabularSoftmax::new(mdp.states(), mdp.actions());
        let mut rng = tree.stream(Purpose::Auxiliary, 100, 0);
        let theta = random_vector(&mut rng, policy.param_dim(), 2.0);
        let mut worst = 0.0f64;
        for s in 0..mdp.states() {
            let obs = Observation::Discrete(s);
            for a in 0..mdp.actions() {
                let analytic = policy.grad_log_prob(&theta, &obs, a)?;
                let numeric = finite_difference(|t| policy.log_prob(t, &obs, a).unwrap_or(f64::NAN), &theta, 1e-5);
                worst = worst.max(analytic.max_abs_diff(&numeric));
            }
        }
        checks.push(check(
            suite,
            format!("tabular {name} finite difference"),
            worst < 1e-8,
            format!("max |Δ| {worst:.3e} (< 1e-8)"),
        ));
    }
    Ok(checks)
}

fn contributions<P: Policy + ?Sized>(
    kind: EstimatorKind,
    policy: &P,
    target: &ParamVector,
    behavior: Option<&ParamVector>,
    trajs: &[Trajectory],
    disc: Discount,
) -> Result<Vec<ParamVector>> {
    Ok(trajs
        .iter()
        .map(|t| match behavior {
            None => contribution(kind, policy, target, t, disc),
            Some(b) => offpolicy_contribution(kind, policy, target, b, t, disc, None),
        })
        .collect::<vrpg_core::Result<_>>()?)
}

/// Largest |mean − exact| / SE over coordinates.
fn standard_errors_off(samples: &[ParamVector], exact: &ParamVector) -> f64 {
    let n = samples.len() as f64;
    let mut worst = 0.0f64;
    for i in 0..exact.len() {
        let mean = samples.iter().map(|c| c[i]).sum::<f64>() / n;
        let var = samples.iter().map(|c| (c[i] - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        let dev = (mean - exact[i]).abs();
        let z = if se > 0.0 {
            dev / se
        } else if dev < 1e-12 {
            0.0
        } else {
            f64::INFINITY
        };
        worst = worst.max(z);
    }
    worst
}

/// Exact expectations of all four estimators by enumeration, and Monte-Carlo
/// means, against the exact gradient.
pub fn unbiasedness(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let suite = Suite::Unbiasedness;
    let tree = SeedTree::new(opts.seed);
    let disc = Discount::new(0.9).expect("valid discount");
    let mut checks = Vec::new();
    for (f, (name, mdp)) in fixtures::all().into_iter().enumerate() {
        let policy = TabularSoftmax::new(mdp.states(), mdp.actions());
        let d = policy.param_dim();
        let mut rng = tree.stream(Purpose::Auxiliary, 200, f as u64);
        let target = random_vector(&mut rng, d, 1.0);
        let mut behavior = target.clone();
        behavior.axpy(1.0, &random_vector(&mut rng, d, 0.5));

        let report = Enumerator::new(&mdp).exact_gradient(&policy, &target, disc, Some(&behavior))?;
        let exact = &report.gradient;
        let fd = finite_difference(|t| exact_value(&mdp, &policy, t, disc).unwrap_or(f64::NAN), &target, 1e-5);
        let gap = exact.max_abs_diff(&fd);
        checks.push(check(
            suite,
            format!("{name} exact gradient vs value differences"),
            gap < 1e-7,
            format!("max |Δ| {gap:.3e} (< 1e-7)"),
        ));
        let off = report.offpolicy.as_ref().expect("behavior supplied");
        for (label, expected) in [
            ("reinforce", &report.expected_reinforce),
            ("gpomdp", &report.expected_gpomdp),
            ("off-policy reinforce", &off.expected_reinforce),
            ("off-policy gpomdp", &off.expected_gpomdp),
        ] {
            let gap = expected.max_abs_diff(exact);
            checks.push(check(
                suite,
                format!("{name} {label} expectation"),
                gap < 1e-8,
                format!("max |E g − ∇V| {gap:.3e} (< 1e-8)"),
            ));
        }

        let on = sample_batch(&mdp, &policy, &target, opts.mc_samples, &tree.child(f as u64), 0)?;
        let from_behavior = sample_batch(&mdp, &policy, &behavior, opts.mc_samples, &tree.child(f as u64), 1)?;
        for kind in [EstimatorKind::Reinforce, EstimatorKind::Gpomdp] {
            for (label, b, trajs) in [("", None, &on), ("off-policy ", Some(&behavior), &from_behavior)] {
                let samples = contributions(kind, &policy, &target, b, trajs, disc)?;
                let z = standard_errors_off(&samples, exact);
                checks.push(check(
                    suite,
                    format!("{name} {label}{kind} monte carlo"),
                    z <= 4.0,
                    format!("max |mean − ∇V| {z:.2} SE over {} samples (≤ 4)", opts.mc_samples),
                ));
            }
        }
    }
    Ok(checks)
}

/// Exact contribution covariance traces, GPOMDP against REINFORCE.
pub fn variance(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let suite = Suite::Variance;
    let tree = SeedTree::new(opts.seed);
    let mut checks = Vec::new();
    let mut any_strict = false;
    for (f, (name, mdp)) in fixtures::all().into_iter().enumerate() {
        let policy = TabularSoftmax::new(mdp.states(), mdp.actions());
        let d = policy.param_dim();
        let mut rng = tree.stream(Purpose::Auxiliary, 300, f as u64);
        let thetas: Vec<ParamVector> =
            std::iter::once(ParamVector::zeros(d)).chain((0..20).map(|_| random_vector(&mut rng, d, 1.0))).collect();
        let (mut worst_ratio, mut ordered, mut strict) = (0.0f64, true, false);
        for theta in &thetas {
            for gamma in [0.5, 0.9, 0.99] {
                let disc = Discount::new(gamma).expect("valid discount");
                let r = Enumerator::new(&mdp).exact_gradient(&policy, theta, disc, None)?;
                let (g, rf) = (r.variance_gpomdp, r.variance_reinforce);
                ordered &= g <= rf * (1.0 + 1e-12) + 1e-15;
                strict |= g < rf * (1.0 - 1e-9);
                worst_ratio = worst_ratio.max(g / rf);
            }
        }
        any_strict |= strict;
        checks.push(check(
            suite,
            format!("{name} tr Cov gpomdp ≤ reinforce"),
            ordered,
            format!("worst ratio {worst_ratio:.4} over {} (θ, γ) pairs (≤ 1)", thetas.len() * 3),
        ));
    }
    checks.push(check(suite, "strict on some fixture", any_strict, format!("strict = {any_strict}")));
    Ok(checks)
}

fn same_run(a: &RunOutput, b: &RunOutput) -> bool {
    a.iterates.len() == b.iterates.len()
        && a.iterates.iter().zip(&b.iterates).all(|((ta, xa), (tb, xb))| {
            ta == tb && xa.len() == xb.len() && xa.iter().zip(xb.iter()).all(|(x, y)| x == y)
        })
        && a.state.v.iter().zip(b.state.v.iter()).all(|(x, y)| x == y)
}

fn reduction_pair<E, P>(
    env: &E,
    policy: &P,
    theta0: &ParamVector,
    lhs: OptimizerConfig,
    rhs: OptimizerConfig,
    seeds: u64,
) -> Result<(bool, usize)>
where
    E: Environment,
    P: Policy,
{
    let mut compared = 0;
    for s in 0..seeds {
        let a = run(env, policy, theta0.clone(), lhs.clone(), SeedTree::new(s))?;
        let b = run(env, policy, theta0.clone(), rhs.clone(), SeedTree::new(s))?;
        if !same_run(&a, &b) {
            return Ok((false, compared));
        }
        compared += a.iterates.len();
    }
    Ok((true, compared))
}

/// Bit-equality of STORM-PG(α=1), STORM-PG(α=0) and PAGE-PG(p=1) with the
/// algorithms they reduce to.
pub fn reductions(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let suite = Suite::Reductions;
    let degenerate = |c: OptimizerConfig| OptimizerConfig { allow_degenerate: true, ..c };
    let mut checks = Vec::new();

    let mdp = fixtures::by_name("three_action_grid").expect("shipped fixture");
    let tab = TabularSoftmax::new(mdp.states(), mdp.actions());
    let tab_theta = random_vector(&mut SeedTree::new(opts.seed).stream(Purpose::Init, 0, 0), tab.param_dim(), 0.5);
    let cart = CartPole::new();
    let mlp = PolicySpec::mlp(4, 2);
    let mlp_theta = mlp.init_params(&mut SeedTree::new(opts.seed).stream(Purpose::Init, 1, 0));

    struct Case {
        label: &'static str,
        lhs: OptimizerConfig,
        rhs: OptimizerConfig,
    }
    let cases = |disc: Discount, eta: f64, t: usize, n: usize, b: usize| {
        [
            Case {
                label: "storm-pg(α=1) ≡ small-batch gpomdp",
                lhs: degenerate(OptimizerConfig::new(Algorithm::StormPg, eta, disc, t).batches(b, b).alpha(1.0)),
                rhs: OptimizerConfig::new(Algorithm::Gpomdp, eta, disc, t).batches(b, b),
            },
            Case {
                label: "storm-pg(α=0) ≡ srvrpg",
                lhs: degenerate(OptimizerConfig::new(Algorithm::StormPg, eta, disc, t).batches(n, b).alpha(0.0)),
                rhs: OptimizerConfig::new(Algorithm::Srvrpg, eta, disc, t).batches(n, b).inner_len(t + 1),
            },
            Case {
                label: "page-pg(p=1) ≡ large-batch gpomdp",
                lhs: OptimizerConfig::new(Algorithm::PagePg, eta, disc, t)
                    .batches(n, b)
                    .switch(SwitchSchedule::Constant(1.0)),
                rhs: OptimizerConfig::new(Algorithm::Gpomdp, eta, disc, t).batches(n, b),
            },
        ]
    };

    for case in cases(Discount::new(0.95).expect("valid"), 0.3, 50, 16, 4) {
        let (ok, n) = reduction_pair(&mdp, &tab, &tab_theta, case.lhs, case.rhs, 5)?;
        checks.push(check(suite, format!("{} (tabular)", case.label), ok, format!("{n} iterates bit-equal")));
    }
    for case in cases(Discount::new(0.9999).expect("valid"), 1e-2, 6, 6, 2) {
        let (ok, n) = reduction_pair(&cart, &mlp, &mlp_theta, case.lhs, case.rhs, 2)?;
        checks.push(check(suite, format!("{} (cartpole)", case.label), ok, format!("{n} iterates bit-equal")));
    }
    Ok(checks)
}

/// Mean cumulative episodes of seeded PAGE-PG runs against
/// average_samples(p, N, B, T).
pub fn accounting(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let suite = Suite::Accounting;
    let (p, n, b, t) = (0.1, 50usize, 5usize, opts.accounting_iterations);
    let mdp: TabularMdp = fixtures::by_name("three_state_loop").expect("shipped fixture");
    let policy = TabularSoftmax::new(mdp.states(), mdp.actions());
    let disc = Discount::new(0.9).expect("valid");
    let cfg = OptimizerConfig::new(Algorithm::PagePg, 0.01, disc, t).batches(n, b).switch(SwitchSchedule::Constant(p));
    let tree = SeedTree::new(opts.seed);

    let mut consistent = true;
    let mut totals = Vec::with_capacity(opts.accounting_runs);
    for r in 0..opts.accounting_runs {
        let out = run(&mdp, &policy, ParamVector::zeros(policy.param_dim()), cfg.clone(), tree.child(r as u64))?;
        let summed: u64 = out.log.rows().iter().map(|row| row.episodes_used).sum();
        consistent &= summed == out.state.episodes && out.state.iteration as usize == t;
        // The initial N-batch precedes the first update.
        totals.push((out.state.episodes - n as u64) as f64);
    }
    let runs = totals.len() as f64;
    let mean = totals.iter().sum::<f64>() / runs;
    let expected = average_samples(p, n, b, t);
    // Per run: T independent switches, each adding N − B with probability p.
    let sigma = (n - b) as f64 * (t as f64 * p * (1.0 - p)).sqrt() / runs.sqrt();
    let z = (mean - expected).abs() / sigma;
    Ok(vec![
        check(
            suite,
            "episode log sums to cumulative count",
            consistent,
            format!("{} runs of T = {t}", opts.accounting_runs),
        ),
        check(
            suite,
            "page-pg mean episodes vs average_samples",
            z <= 4.0,
            format!("mean {mean:.2} vs {expected:.2}, {z:.2} σ (≤ 4)"),
        ),
    ])
}
