use rand::Rng;

use crate::error::{Error, Result};
use crate::mdp::Observation;
use crate::rng::StreamRng;

use super::{check_logits, log_sum_exp, softmax, ParamVector, Policy};

/// Softmax over the output of an `input → h1 → h2 → actions` network with
/// Tanh hidden activations.
///
/// Parameter layout (row-major weights, each followed by its bias):
/// `W1[h1×input] b1[h1] W2[h2×h1] b2[h2] W3[actions×h2] b3[actions]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpSoftmax {
    input: usize,
    hidden: [usize; 2],
    actions: usize,
}

struct Offsets {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    w3: usize,
    b3: usize,
    end: usize,
}

struct Forward {
    h1: Vec<f64>,
    h2: Vec<f64>,
    logits: Vec<f64>,
}

impl MlpSoftmax {
    pub fn new(input: usize, hidden: [usize; 2], actions: usize) -> Self {
        MlpSoftmax { input, hidden, actions }
    }

    pub fn input_dim(&self) -> usize {
        self.input
    }

    pub fn hidden(&self) -> [usize; 2] {
        self.hidden
    }

    fn offsets(&self) -> Offsets {
        let [h1, h2] = self.hidden;
        let w1 = 0;
        let b1 = w1 + h1 * self.input;
        let w2 = b1 + h1;
        let b2 = w2 + h2 * h1;
        let w3 = b2 + h2;
        let b3 = w3 + self.actions * h2;
        Offsets { w1, b1, w2, b2, w3, b3, end: b3 + self.actions }
    }

    pub fn init_params(&self, rng: &mut StreamRng) -> ParamVector {
        let o = self.offsets();
        let [h1, h2] = self.hidden;
        let mut theta = vec![0.0; o.end];
        let mut fill = |range: std::ops::Range<usize>, fan_in: usize| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for v in &mut theta[range] {
                *v = rng.gen_range(-bound..bound);
            }
        };
        fill(o.w1..o.b1, self.input);
        fill(o.w2..o.b2, h1);
        fill(o.w3..o.b3, h2);
        ParamVector::from_vec(theta)
    }

    fn features<'a>(&self, obs: &'a Observation) -> Result<&'a [f64]> {
        match obs {
            Observation::Continuous(x) if x.len() == self.input => Ok(x),
            Observation::Continuous(x) => Err(Error::config(format!(
                "observation has dimension {} but the network expects {}",
                x.len(),
                self.input
            ))),
            Observation::Discrete(_) => Err(Error::config("MLP policy needs continuous observations")),
        }
    }

    fn forward(&self, theta: &[f64], x: &[f64]) -> Result<Forward> {
        let o = self.offsets();
        if theta.len() != o.end {
            return Err(Error::config(format!(
                "parameter vector has dimension {} but the policy needs {}",
                theta.len(),
                o.end
            )));
        }
        let h1 = affine(&theta[o.w1..o.b1], &theta[o.b1..o.w2], x, true);
        let h2 = affine(&theta[o.w2..o.b2], &theta[o.b2..o.w3], &h1, true);
        let logits = affine(&theta[o.w3..o.b3], &theta[o.b3..o.end], &h2, false);
        check_logits(&logits)?;
        Ok(Forward { h1, h2, logits })
    }
}

/// `act(W x + b)` with `W` stored row-major as `[b.len() × x.len()]`.
fn affine(w: &[f64], b: &[f64], x: &[f64], tanh: bool) -> Vec<f64> {
    b.iter()
        .zip(w.chunks_exact(x.len()))
        .map(|(bias, row)| {
            let z = bias + row.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>();
            if tanh {
                z.tanh()
            } else {
                z
            }
        })
        .collect()
}

/// Accumulates `scale · δ ⊗ x` into a weight block and `scale · δ` into its bias.
fn accumulate_layer(gw: &mut [f64], gb: &mut [f64], delta: &[f64], x: &[f64], scale: f64) {
    for ((row, gbias), d) in gw.chunks_exact_mut(x.len()).zip(gb.iter_mut()).zip(delta) {
        let sd = scale * d;
        *gbias += sd;
        for (g, xi) in row.iter_mut().zip(x) {
            *g += sd * xi;
        }
    }
}

/// `(Wᵀ δ) ⊙ (1 − h²)`: back-propagates through a layer into a Tanh output `h`.
fn back_through(w: &[f64], delta: &[f64], h: &[f64]) -> Vec<f64> {
    let mut upstream = vec![0.0; h.len()];
    for (row, d) in w.chunks_exact(h.len()).zip(delta) {
        for (u, wi) in upstream.iter_mut().zip(row) {
            *u += wi * d;
        }
    }
    upstream.iter().zip(h).map(|(u, hi)| u * (1.0 - hi * hi)).collect()
}

impl Policy for MlpSoftmax {
    fn param_dim(&self) -> usize {
        self.offsets().end
    }

    fn action_count(&self) -> usize {
        self.actions
    }

    fn logits(&self, theta: &[f64], obs: &Observation) -> Result<Vec<f64>> {
        Ok(self.forward(theta, self.features(obs)?)?.logits)
    }

    fn accumulate_score(
        &self,
        theta: &[f64],
        obs: &Observation,
        action: usize,
        scale: f64,
        out: &mut [f64],
    ) -> Result<f64> {
        self.check_action(action)?;
        let x = self.features(obs)?;
        let fwd = self.forward(theta, x)?;
        let o = self.offsets();

        // d log softmax(z)[a] / dz = e_a − softmax(z)
        let mut delta3 = softmax(&fwd.logits);
        for (b, d) in delta3.iter_mut().enumerate() {
            *d = if b == action { 1.0 } else { 0.0 } - *d;
        }
        let delta2 = back_through(&theta[o.w3..o.b3], &delta3, &fwd.h2);
        let delta1 = back_through(&theta[o.w2..o.b2], &delta2, &fwd.h1);

        let (head, b3) = out.split_at_mut(o.b3);
        let (head, w3) = head.split_at_mut(o.w3);
        accumulate_layer(&mut w3[..], &mut b3[..self.actions], &delta3, &fwd.h2, scale);
        let (head, b2) = head.split_at_mut(o.b2);
        let (head, w2) = head.split_at_mut(o.w2);
        accumulate_layer(w2, b2, &delta2, &fwd.h1, scale);
        let (head, b1) = head.split_at_mut(o.b1);
        accumulate_layer(head, b1, &delta1, x, scale);

        Ok(fwd.logits[action] - log_sum_exp(&fwd.logits))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedTree;

    #[test]
    fn paper_network_dimension() {
        // 4·32+32 + 32·32+32 + 32·2+2
        assert_eq!(MlpSoftmax::new(4, [32, 32], 2).param_dim(), 1282);
        assert_eq!(MlpSoftmax::new(6, [32, 32], 3).param_dim(), 6 * 32 + 32 + 32 * 32 + 32 + 32 * 3 + 3);
    }

    #[test]
    fn zero_network_is_uniform() {
        let pol = MlpSoftmax::new(4, [32, 32], 3);
        let theta = ParamVector::zeros(pol.param_dim());
        let obs = Observation::Continuous(vec![0.3, -1.0, 2.0, 0.1]);
        for p in pol.action_distribution(&theta, &obs).unwrap() {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn init_respects_fan_in_bounds_and_zero_biases() {
        let pol = MlpSoftmax::new(4, [32, 32], 2);
        let theta = pol.init_params(&mut SeedTree::new(3).stream(crate::rng::Purpose::Init, 0, 0));
        let o = pol.offsets();
        assert!(theta.as_slice()[o.w1..o.b1].iter().all(|w| w.abs() < 0.5));
        assert!(theta.as_slice()[o.w2..o.b2].iter().all(|w| w.abs() < 1.0 / 32f64.sqrt()));
        assert!(theta.as_slice()[o.b1..o.w2].iter().all(|&b| b == 0.0));
        assert!(theta.as_slice()[o.b3..o.end].iter().all(|&b| b == 0.0));
    }

    #[test]
    fn rejects_wrong_observation() {
        let pol = MlpSoftmax::new(4, [8, 8], 2);
        let theta = ParamVector::zeros(pol.param_dim());
        assert!(pol.logits(theta.as_slice(), &Observation::Continuous(vec![0.0; 3])).is_err());
        assert!(pol.logits(theta.as_slice(), &Observation::Discrete(0)).is_err());
    }
}
