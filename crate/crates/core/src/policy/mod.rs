//! Softmax policies with exact score functions ∇_θ log π_θ(a|s).

mod mlp;
mod params;
mod tabular;

pub use mlp::MlpSoftmax;
pub use params::{ParamVector, SNAPSHOT_MAGIC};
pub use tabular::TabularSoftmax;

use crate::error::{Error, Result};
use crate::mdp::{Observation, Trajectory};
use crate::rng::StreamRng;

/// A differentiable stochastic policy over a discrete action set whose action
/// distribution is the softmax of a logit vector.
///
/// The two required methods work on raw slices and skip the full-parameter
/// finiteness scan; estimators call [`Policy::check_params`] once per
/// trajectory instead.
pub trait Policy: Sync {
    fn param_dim(&self) -> usize;

    fn action_count(&self) -> usize;

    /// Final-layer logits at `obs`.
    fn logits(&self, theta: &[f64], obs: &Observation) -> Result<Vec<f64>>;

    /// Adds `scale * ∇_θ log π_θ(action | obs)` into `out` and returns
    /// `log π_θ(action | obs)`.
    fn accumulate_score(
        &self,
        theta: &[f64],
        obs: &Observation,
        action: usize,
        scale: f64,
        out: &mut [f64],
    ) -> Result<f64>;

    /// Dimension and finiteness check for a full parameter vector.
    fn check_params(&self, theta: &ParamVector) -> Result<()> {
        if theta.len() != self.param_dim() {
            return Err(Error::config(format!(
                "parameter vector has dimension {} but the policy needs {}",
                theta.len(),
                self.param_dim()
            )));
        }
        if let Some(i) = theta.iter().position(|v| !v.is_finite()) {
            return Err(Error::numeric(None, format!("parameter {i} is not finite")));
        }
        Ok(())
    }

    fn action_distribution(&self, theta: &ParamVector, obs: &Observation) -> Result<Vec<f64>> {
        self.check_params(theta)?;
        Ok(softmax(&self.logits(theta.as_slice(), obs)?))
    }

    fn log_prob(&self, theta: &ParamVector, obs: &Observation, action: usize) -> Result<f64> {
        self.check_params(theta)?;
        self.check_action(action)?;
        let logits = self.logits(theta.as_slice(), obs)?;
        Ok(logits[action] - log_sum_exp(&logits))
    }

    fn grad_log_prob(&self, theta: &ParamVector, obs: &Observation, action: usize) -> Result<ParamVector> {
        self.check_params(theta)?;
        let mut out = ParamVector::zeros(self.param_dim());
        self.accumulate_score(theta.as_slice(), obs, action, 1.0, out.as_mut_slice())?;
        Ok(out)
    }

    fn check_action(&self, action: usize) -> Result<()> {
        if action < self.action_count() {
            Ok(())
        } else {
            Err(Error::argument(format!("action {action} out of range 0..{}", self.action_count())))
        }
    }
}

/// Policy kinds selectable by configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicySpec {
    Tabular(TabularSoftmax),
    Mlp(MlpSoftmax),
}

impl PolicySpec {
    pub fn tabular(states: usize, actions: usize) -> Self {
        PolicySpec::Tabular(TabularSoftmax::new(states, actions))
    }

    /// Two Tanh hidden layers of width 32.
    pub fn mlp(input: usize, actions: usize) -> Self {
        PolicySpec::Mlp(MlpSoftmax::new(input, [32, 32], actions))
    }

    /// Initial parameters: zero logits for tabular policies, seeded
    /// `U(-1/√fan_in, 1/√fan_in)` weights and zero biases for MLPs.
    pub fn init_params(&self, rng: &mut StreamRng) -> ParamVector {
        match self {
            PolicySpec::Tabular(p) => ParamVector::zeros(p.param_dim()),
            PolicySpec::Mlp(p) => p.init_params(rng),
        }
    }

    fn inner(&self) -> &dyn Policy {
        match self {
            PolicySpec::Tabular(p) => p,
            PolicySpec::Mlp(p) => p,
        }
    }
}

impl Policy for PolicySpec {
    fn param_dim(&self) -> usize {
        self.inner().param_dim()
    }

    fn action_count(&self) -> usize {
        self.inner().action_count()
    }

    fn logits(&self, theta: &[f64], obs: &Observation) -> Result<Vec<f64>> {
        self.inner().logits(theta, obs)
    }

    fn accumulate_score(
        &self,
        theta: &[f64],
        obs: &Observation,
        action: usize,
        scale: f64,
        out: &mut [f64],
    ) -> Result<f64> {
        self.inner().accumulate_score(theta, obs, action, scale, out)
    }
}

pub fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln()
}

/// Max-subtracted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub(crate) fn check_logits(logits: &[f64]) -> Result<()> {
    if logits.iter().all(|z| z.is_finite()) {
        Ok(())
    } else {
        Err(Error::numeric(None, "policy produced non-finite logits"))
    }
}

/// Largest score norm max_h ‖∇ log π_θ(a_h|s_h)‖ over a set of trajectories.
///
/// An empirical stand-in for the bounded-score constant G; nothing guarantees
/// it bounds the score elsewhere.
pub fn max_score_norm<P: Policy + ?Sized>(policy: &P, theta: &ParamVector, trajs: &[Trajectory]) -> Result<f64> {
    policy.check_params(theta)?;
    let mut buf = vec![0.0; policy.param_dim()];
    let mut max = 0.0f64;
    for traj in trajs {
        for (obs, &a) in traj.states.iter().zip(&traj.actions) {
            buf.fill(0.0);
            policy.accumulate_score(theta.as_slice(), obs, a, 1.0, &mut buf)?;
            max = max.max(buf.iter().map(|g| g * g).sum::<f64>().sqrt());
        }
    }
    Ok(max)
}
