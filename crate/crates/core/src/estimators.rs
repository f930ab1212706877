//! REINFORCE and GPOMDP gradient estimators, on-policy and importance
//! weighted.
//!
//! Off-policy variants estimate the gradient at `target` from trajectories
//! sampled under `behavior`, weighting by
//! ω(τ) = Π_j π_target(a_j|s_j) / π_behavior(a_j|s_j). All weight products are
//! formed in log space and exponentiated once per use.

use std::fmt;

use crate::error::{Error, Result};
use crate::mdp::{discounted_return, Discount, Observation, Trajectory};
use crate::policy::{log_sum_exp, ParamVector, Policy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    /// Full-return estimator: (Σ_h ∇log π(a_h|s_h)) · R(τ).
    Reinforce,
    /// Reward-to-go estimator: Σ_h γ^h r_h · Σ_{z≤h} ∇log π(a_z|s_z).
    Gpomdp,
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EstimatorKind::Reinforce => "reinforce",
            EstimatorKind::Gpomdp => "gpomdp",
        })
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "reinforce" => Ok(EstimatorKind::Reinforce),
            "gpomdp" => Ok(EstimatorKind::Gpomdp),
            other => Err(Error::argument(format!("unknown estimator '{other}' (expected reinforce or gpomdp)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sampling {
    OnPolicy,
    OffPolicy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EstimateKind {
    pub estimator: EstimatorKind,
    pub sampling: Sampling,
}

/// A batch-averaged gradient estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct GradEstimate {
    pub vector: ParamVector,
    pub batch_size: usize,
    pub kind: EstimateKind,
    /// Iteration index of the behaviour parameters, for off-policy estimates.
    pub behavior: Option<u64>,
}

fn log_prob_at<P: Policy + ?Sized>(policy: &P, theta: &ParamVector, obs: &Observation, action: usize) -> Result<f64> {
    let logits = policy.logits(theta.as_slice(), obs)?;
    Ok(logits[action] - log_sum_exp(&logits))
}

fn checked_exp(log_w: f64, step: usize) -> Result<f64> {
    let w = log_w.exp();
    if w.is_finite() && !log_w.is_nan() {
        Ok(w)
    } else {
        Err(Error::numeric(Some(step), format!("importance weight overflow (log weight {log_w})")))
    }
}

fn clip(w: f64, max: Option<f64>) -> f64 {
    match max {
        Some(m) => w.min(m),
        None => w,
    }
}

/// Σ_h score_h, with the trajectory's per-step log-probabilities at `theta`.
fn score_sum<P: Policy + ?Sized>(
    policy: &P,
    theta: &ParamVector,
    traj: &Trajectory,
) -> Result<(ParamVector, Vec<f64>)> {
    let mut sum = ParamVector::zeros(policy.param_dim());
    let log_probs = traj
        .states
        .iter()
        .zip(&traj.actions)
        .map(|(obs, &a)| policy.accumulate_score(theta.as_slice(), obs, a, 1.0, sum.as_mut_slice()))
        .collect::<Result<Vec<_>>>()?;
    Ok((sum, log_probs))
}

/// REINFORCE contribution g(τ|θ) = (Σ_h ∇log π_θ(a_h|s_h)) · R(τ).
pub fn reinforce_contrib<P: Policy + ?Sized>(
    policy: &P,
    theta: &ParamVector,
    traj: &Trajectory,
    discount: Discount,
) -> Result<ParamVector> {
    policy.check_params(theta)?;
    let (mut g, _) = score_sum(policy, theta, traj)?;
    g.scale(discounted_return(traj, discount));
    Ok(g)
}

/// GPOMDP contribution g(τ|θ) = Σ_h γ^h r_h Z_h with Z_h = Σ_{z≤h} ∇log π_θ(a_z|s_z),
/// computed in one pass over a running score prefix.
pub fn gpomdp_contrib<P: Policy + ?Sized>(
    policy: &P,
    theta: &ParamVector,
    traj: &Trajectory,
    discount: Discount,
) -> Result<ParamVector> {
    offpolicy_gpomdp_impl(policy, theta, None, traj, discount, None)
}

/// Per-step truncated weights ω_{0:h} for h = 0..len, from a running log sum.
pub fn truncated_weights<P: Policy + ?Sized>(
    policy: &P,
    target: &ParamVector,
    behavior: &ParamVector,
    traj: &Trajectory,
) -> Result<Vec<f64>> {
    policy.check_params(target)?;
    policy.check_params(behavior)?;
    let mut log_w = 0.0;
    let mut out = Vec::with_capacity(traj.len());
    for (h, (obs, &a)) in traj.states.iter().zip(&traj.actions).enumerate() {
        log_w += log_prob_at(policy, target, obs, a)? - log_prob_at(policy, behavior, obs, a)?;
        out.push(checked_exp(log_w, h)?);
    }
    Ok(out)
}

/// Full-trajectory importance weight ω(τ | behavior, target).
pub fn weight_full<P: Policy + ?Sized>(
    policy: &P,
    target: &ParamVector,
    behavior: &ParamVector,
    traj: &Trajectory,
) -> Result<f64> {
    Ok(truncated_weights(policy, target, behavior, traj)?.last().copied().unwrap_or(1.0))
}

/// Truncated importance weight ω_{0:h}, covering steps `0..=h`.
pub fn weight_truncated<P: Policy + ?Sized>(
    policy: &P,
    target: &ParamVector,
    behavior: &ParamVector,
    traj: &Trajectory,
    h: usize,
) -> Result<f64> {
    if h >= traj.len() {
        return Err(Error::argument(format!("truncation step {h} beyond trajectory length {}", traj.len())));
    }
    policy.check_params(target)?;
    policy.check_params(behavior)?;
    let mut log_w = 0.0;
    for (obs, &a) in traj.states.iter().zip(&traj.actions).take(h + 1) {
        log_w += log_prob_at(policy, target, obs, a)? - log_prob_at(policy, behavior, obs, a)?;
    }
    checked_exp(log_w, h)
}

/// Off-policy REINFORCE: ω(τ) · (Σ_h ∇log π_target(a_h|s_h)) · R(τ).
pub fn offpolicy_reinforce_contrib<P: Policy + ?Sized>(
    policy: &P,
    target: &ParamVector,
    behavior: &ParamVector,
    traj: &Trajectory,
    discount: Discount,
) -> Result<ParamVector> {
    offpolicy_reinforce_impl(policy, target, behavior, traj, discount, None)
}

/// Off-policy GPOMDP: Σ_h ω_{0:h}(τ) γ^h r_h Z_h with scores at `target`.
pub fn offpolicy_gpomdp_contrib<P: Policy + ?Sized>(
    policy: &P,
    target: &ParamVector,
    behavior: &ParamVector,
    traj: &Trajectory,
    discount: Discount,
) -> Result<ParamVector> {
    offpolicy_gpomdp_impl(policy, target, Some(behavior), traj, discount, None)
}

fn offpolicy_reinforce_impl<P: Policy + ?Sized>(
    policy: &P,
    target: &ParamVector,
    behavior: &ParamVector,
    traj: &Trajectory,
    discount: Discount,
    max_weight: Option<f64>,
) -> Result<ParamVector> {
    policy.check_params(target)?;
    policy.check_params(behavior)?;
    let (mut g, target_lp) = score_sum(policy, target, traj)?;
    let mut log_w = 0.0;
    for (h, ((obs, &a), lp)) in traj.states.iter().zip(&traj.actions).zip(&target_lp).enumerate() {
        log_w += lp - log_prob_at(policy, behavior, obs, a)?;
        if log_w.is_nan() {
            return Err(Error::numeric(Some(h), "importance log-weight is NaN"));
        }
    }
    let w = clip(checked_exp(log_w, traj.len().saturating_sub(1))?, max_weight);
    g.scale(w * discounted_return(traj, discount));
    Ok(g)
}

fn offpolicy_gpomdp_impl<P: Policy + ?Sized>(
    policy: &P,
    target: &ParamVector,
    behavior: Option<&ParamVector>,
    traj: &Trajectory,
    discount: Discount,
    max_weight: Option<f64>,
) -> Result<ParamVector> {
    policy.check_params(target)?;
    if let Some(b) = behavior {
        policy.check_params(b)?;
    }
    let d = policy.param_dim();
    let mut g = ParamVector::zeros(d);
    let mut prefix = vec![0.0; d];
    let mut log_w = 0.0;
    let mut gamma_h = 1.0;
    for (h, ((obs, &a), &r)) in traj.states.iter().zip(&traj.actions).zip(&traj.rewards).enumerate() {
        let lp = policy.accumulate_score(target.as_slice(), obs, a, 1.0, &mut prefix)?;
        let coeff = match behavior {
            None => gamma_h * r,
            Some(b) => {
                log_w += lp - log_prob_at(policy, b, obs, a)?;
                clip(checked_exp(log_w, h)?, max_weight) * gamma_h * r
            }
        };
        if coeff != 0.0 {
            for (gi, zi) in g.as_mut_slice().iter_mut().zip(&prefix) {
                *gi += coeff * zi;
            }
        }
        gamma_h *= discount.gamma();
    }
    Ok(g)
}

/// On-policy contribution of either estimator.
pub fn contribution<P: Policy + ?Sized>(
    kind: EstimatorKind,
    policy: &P,
    theta: &ParamVector,
    traj: &Trajectory,
    discount: Discount,
) -> Result<ParamVector> {
    match kind {
        EstimatorKind::Reinforce => reinforce_contrib(policy, theta, traj, discount),
        EstimatorKind::Gpomdp => gpomdp_contrib(policy, theta, traj, discount),
    }
}

/// Off-policy contribution of either estimator, optionally clipping every
/// importance weight at `max_weight` (which biases the estimate).
pub fn offpolicy_contribution<P: Policy + ?Sized>(
    kind: EstimatorKind,
    policy: &P,
    target: &ParamVector,
    behavior: &ParamVector,
    traj: &Trajectory,
    discount: Discount,
    max_weight: Option<f64>,
) -> Result<ParamVector> {
    match kind {
        EstimatorKind::Reinforce => offpolicy_reinforce_impl(policy, target, behavior, traj, discount, max_weight),
        EstimatorKind::Gpomdp => offpolicy_gpomdp_impl(policy, target, Some(behavior), traj, discount, max_weight),
    }
}

/// Index-ordered mean of per-trajectory contributions.
pub fn mean_vector(contribs: &[ParamVector]) -> Result<ParamVector> {
    let first = contribs.first().ok_or_else(|| Error::argument("cannot average an empty batch"))?;
    let mut sum = ParamVector::zeros(first.len());
    for c in contribs {
        if c.len() != sum.len() {
            return Err(Error::config("contributions have different dimensions"));
        }
        for (s, v) in sum.as_mut_slice().iter_mut().zip(c.iter()) {
            *s += v;
        }
    }
    sum.scale(1.0 / contribs.len() as f64);
    Ok(sum)
}

/// Monte-Carlo average of a batch of contributions.
pub fn batch_mean(contribs: &[ParamVector], kind: EstimateKind) -> Result<GradEstimate> {
    Ok(GradEstimate { vector: mean_vector(contribs)?, batch_size: contribs.len(), kind, behavior: None })
}

/// Importance-weight diagnostics over a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightReport {
    /// ω(τ_i) per trajectory.
    pub full: Vec<f64>,
    /// ω_{0:h}(τ_i) per trajectory and step.
    pub truncated: Vec<Vec<f64>>,
    pub stats: WeightStats,
}

/// Summary of the full-trajectory weights of one batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightStats {
    pub n: usize,
    pub mean: f64,
    pub max: f64,
    /// Empirical (population) variance.
    pub variance: f64,
}

impl WeightReport {
    pub fn compute<P: Policy + ?Sized>(
        policy: &P,
        target: &ParamVector,
        behavior: &ParamVector,
        trajs: &[Trajectory],
    ) -> Result<Self> {
        if trajs.is_empty() {
            return Err(Error::argument("cannot report weights of an empty batch"));
        }
        let truncated =
            trajs.iter().map(|t| truncated_weights(policy, target, behavior, t)).collect::<Result<Vec<_>>>()?;
        let full: Vec<f64> = truncated.iter().map(|w| w.last().copied().unwrap_or(1.0)).collect();
        let n = full.len() as f64;
        let mean = full.iter().sum::<f64>() / n;
        let variance = full.iter().map(|w| (w - mean) * (w - mean)).sum::<f64>() / n;
        let max = full.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let stats = WeightStats { n: full.len(), mean, max, variance };
        Ok(WeightReport { full, truncated, stats })
    }
}

impl WeightStats {
    pub const CSV_HEADER: [&'static str; 6] = ["run_id", "iteration", "n", "mean_weight", "max_weight", "var_weight"];

    /// One CSV record matching [`WeightStats::CSV_HEADER`].
    pub fn csv_record(&self, run_id: usize, iteration: u64) -> [String; 6] {
        [
            run_id.to_string(),
            iteration.to_string(),
            self.n.to_string(),
            format!("{:e}", self.mean),
            format!("{:e}", self.max),
            format!("{:e}", self.variance),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::TabularSoftmax;

    fn gamma() -> Discount {
        Discount::new(0.9).unwrap()
    }

    fn traj(steps: &[(usize, usize, f64)]) -> Trajectory {
        let mut t = Trajectory::default();
        for &(s, a, r) in steps {
            t.push(Observation::Discrete(s), a, r);
        }
        t
    }

    fn policy() -> TabularSoftmax {
        TabularSoftmax::new(2, 2)
    }

    fn theta(v: [f64; 4]) -> ParamVector {
        ParamVector::from_vec(v.to_vec())
    }

    #[test]
    fn zero_return_gives_zero_vector() {
        let t = traj(&[(0, 0, 0.0), (1, 1, 0.0)]);
        let th = theta([0.3, -0.1, 0.7, 0.2]);
        assert_eq!(reinforce_contrib(&policy(), &th, &t, gamma()).unwrap(), ParamVector::zeros(4));
        assert_eq!(gpomdp_contrib(&policy(), &th, &t, gamma()).unwrap(), ParamVector::zeros(4));
        let other = theta([0.0; 4]);
        assert_eq!(offpolicy_reinforce_contrib(&policy(), &th, &other, &t, gamma()).unwrap(), ParamVector::zeros(4));
        assert_eq!(offpolicy_gpomdp_contrib(&policy(), &th, &other, &t, gamma()).unwrap(), ParamVector::zeros(4));
    }

    #[test]
    fn single_step_estimators_coincide() {
        let t = traj(&[(1, 0, 2.5)]);
        let th = theta([0.3, -0.1, 0.7, 0.2]);
        let r = reinforce_contrib(&policy(), &th, &t, gamma()).unwrap();
        let g = gpomdp_contrib(&policy(), &th, &t, gamma()).unwrap();
        let mut expected = policy().grad_log_prob(&th, &Observation::Discrete(1), 0).unwrap();
        expected.scale(2.5);
        assert_eq!(r, expected);
        assert_eq!(g, expected);
    }

    #[test]
    fn identical_policies_reduce_to_on_policy() {
        let t = traj(&[(0, 1, 1.0), (1, 0, -0.5), (0, 0, 2.0)]);
        let th = theta([0.3, -0.1, 0.7, 0.2]);
        assert_eq!(weight_full(&policy(), &th, &th, &t).unwrap(), 1.0);
        for h in 0..3 {
            assert_eq!(weight_truncated(&policy(), &th, &th, &t, h).unwrap(), 1.0);
        }
        assert_eq!(
            offpolicy_reinforce_contrib(&policy(), &th, &th, &t, gamma()).unwrap(),
            reinforce_contrib(&policy(), &th, &t, gamma()).unwrap()
        );
        assert_eq!(
            offpolicy_gpomdp_contrib(&policy(), &th, &th, &t, gamma()).unwrap(),
            gpomdp_contrib(&policy(), &th, &t, gamma()).unwrap()
        );
    }

    #[test]
    fn single_step_weight_is_probability_ratio() {
        let t = traj(&[(0, 1, 1.0)]);
        let target = theta([0.0, 1.0, 0.0, 0.0]);
        let behavior = theta([0.5, -0.5, 0.0, 0.0]);
        let p = |th: &ParamVector| policy().action_distribution(th, &Observation::Discrete(0)).unwrap()[1];
        let w = weight_full(&policy(), &target, &behavior, &t).unwrap();
        assert!((w - p(&target) / p(&behavior)).abs() < 1e-14);
    }

    #[test]
    fn last_truncated_weight_is_full_weight() {
        let t = traj(&[(0, 1, 1.0), (1, 0, -0.5), (0, 0, 2.0)]);
        let target = theta([0.2, 1.0, -0.3, 0.4]);
        let behavior = theta([0.5, -0.5, 0.1, 0.0]);
        let full = weight_full(&policy(), &target, &behavior, &t).unwrap();
        assert_eq!(weight_truncated(&policy(), &target, &behavior, &t, 2).unwrap(), full);
        assert!(weight_truncated(&policy(), &target, &behavior, &t, 3).is_err());
    }

    #[test]
    fn one_sided_shift_makes_truncated_weights_nondecreasing() {
        // Target raises the logit of every action the trajectory takes, so each
        // per-step ratio π_target/π_behavior is at least 1.
        let t = traj(&[(0, 1, 1.0), (1, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0)]);
        let behavior = theta([0.1, -0.2, 0.3, 0.0]);
        let target = theta([0.1, 0.8, 1.3, 0.0]);
        let w = truncated_weights(&policy(), &target, &behavior, &t).unwrap();
        assert!(w.windows(2).all(|p| p[1] >= p[0]));
        assert!(w[0] > 1.0);
    }

    #[test]
    fn clipping_caps_weights() {
        let t = traj(&[(0, 1, 1.0), (1, 0, 1.0)]);
        let behavior = theta([3.0, -3.0, -3.0, 3.0]);
        let target = theta([0.0; 4]);
        let unclipped =
            offpolicy_contribution(EstimatorKind::Reinforce, &policy(), &target, &behavior, &t, gamma(), None).unwrap();
        let clipped =
            offpolicy_contribution(EstimatorKind::Reinforce, &policy(), &target, &behavior, &t, gamma(), Some(2.0))
                .unwrap();
        let w = weight_full(&policy(), &target, &behavior, &t).unwrap();
        assert!(w > 2.0);
        for (u, c) in unclipped.iter().zip(clipped.iter()) {
            assert!((c - u * 2.0 / w).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_trajectory_contributes_zero() {
        let t = Trajectory::default();
        let th = theta([0.3, -0.1, 0.7, 0.2]);
        assert_eq!(reinforce_contrib(&policy(), &th, &t, gamma()).unwrap(), ParamVector::zeros(4));
        assert_eq!(gpomdp_contrib(&policy(), &th, &t, gamma()).unwrap(), ParamVector::zeros(4));
        assert_eq!(weight_full(&policy(), &th, &theta([0.0; 4]), &t).unwrap(), 1.0);
    }

    #[test]
    fn dimension_mismatch_is_config_error() {
        let t = traj(&[(0, 0, 1.0)]);
        assert!(matches!(reinforce_contrib(&policy(), &ParamVector::zeros(3), &t, gamma()), Err(Error::Config(_))));
    }

    #[test]
    fn batch_mean_contract() {
        let kind = EstimateKind { estimator: EstimatorKind::Gpomdp, sampling: Sampling::OnPolicy };
        let x = ParamVector::from_vec(vec![1.5, -2.0]);
        let single = batch_mean(std::slice::from_ref(&x), kind).unwrap();
        assert_eq!(single.vector, x);
        assert_eq!(single.batch_size, 1);
        let mut neg = x.clone();
        neg.scale(-1.0);
        assert_eq!(batch_mean(&[x, neg], kind).unwrap().vector, ParamVector::zeros(2));
        assert!(matches!(batch_mean(&[], kind), Err(Error::Argument(_))));
    }

    #[test]
    fn weight_report_statistics() {
        let trajs = vec![traj(&[(0, 1, 1.0)]), traj(&[(0, 0, 1.0)])];
        let target = theta([0.0, 1.0, 0.0, 0.0]);
        let behavior = theta([0.0; 4]);
        let rep = WeightReport::compute(&policy(), &target, &behavior, &trajs).unwrap();
        let e = std::f64::consts::E;
        let (w1, w0) = (2.0 * e / (1.0 + e), 2.0 / (1.0 + e));
        assert!((rep.full[0] - w1).abs() < 1e-14 && (rep.full[1] - w0).abs() < 1e-14);
        assert!((rep.stats.mean - 1.0).abs() < 1e-14);
        assert_eq!(rep.stats.max, rep.full[0]);
        assert!((rep.stats.variance - ((w1 - 1.0).powi(2) + (w0 - 1.0).powi(2)) / 2.0).abs() < 1e-14);
        assert_eq!(rep.stats.csv_record(3, 7)[..3], ["3".to_string(), "7".to_string(), "2".to_string()]);
    }
}
