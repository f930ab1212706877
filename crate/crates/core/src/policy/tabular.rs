use crate::error::{Error, Result};
use crate::mdp::Observation;

use super::{check_logits, softmax, Policy};

/// Softmax over one logit per (state, action); θ[s·n_a + a].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TabularSoftmax {
    states: usize,
    actions: usize,
}

impl TabularSoftmax {
    pub fn new(states: usize, actions: usize) -> Self {
        TabularSoftmax { states, actions }
    }

    pub fn states(&self) -> usize {
        self.states
    }

    fn state_index(&self, obs: &Observation) -> Result<usize> {
        match *obs {
            Observation::Discrete(s) if s < self.states => Ok(s),
            Observation::Discrete(s) => {
                Err(Error::config(format!("state {s} out of range for a {}-state table", self.states)))
            }
            Observation::Continuous(_) => Err(Error::config("tabular policy needs discrete observations")),
        }
    }

    fn block<'a>(&self, theta: &'a [f64], s: usize) -> Result<&'a [f64]> {
        if theta.len() != self.param_dim() {
            return Err(Error::config(format!(
                "parameter vector has dimension {} but the policy needs {}",
                theta.len(),
                self.param_dim()
            )));
        }
        Ok(&theta[s * self.actions..(s + 1) * self.actions])
    }
}

impl Policy for TabularSoftmax {
    fn param_dim(&self) -> usize {
        self.states * self.actions
    }

    fn action_count(&self) -> usize {
        self.actions
    }

    fn logits(&self, theta: &[f64], obs: &Observation) -> Result<Vec<f64>> {
        let s = self.state_index(obs)?;
        let logits = self.block(theta, s)?.to_vec();
        check_logits(&logits)?;
        Ok(logits)
    }

    // ∂ log π(a|s) / ∂θ[s, b] = 1{a = b} − π(b|s); zero outside state s.
    fn accumulate_score(
        &self,
        theta: &[f64],
        obs: &Observation,
        action: usize,
        scale: f64,
        out: &mut [f64],
    ) -> Result<f64> {
        self.check_action(action)?;
        let s = self.state_index(obs)?;
        let logits = self.block(theta, s)?;
        check_logits(logits)?;
        let probs = softmax(logits);
        let base = s * self.actions;
        for (b, p) in probs.iter().enumerate() {
            let indicator = if b == action { 1.0 } else { 0.0 };
            out[base + b] += scale * (indicator - p);
        }
        Ok(logits[action] - super::log_sum_exp(logits))
    }
}
