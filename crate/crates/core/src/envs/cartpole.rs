use rand::Rng;

use crate::error::{Error, Result};
use crate::mdp::{Environment, Observation, ObservationSpace, Transition};
use crate::rng::StreamRng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartPoleState {
    pub x: f64,
    pub x_dot: f64,
    pub phi: f64,
    pub phi_dot: f64,
    /// Steps taken so far in the episode.
    pub steps: usize,
}

/// Cart-pole balancing with Euler-integrated Barto–Sutton–Anderson dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct CartPole {
    pub gravity: f64,
    pub cart_mass: f64,
    pub pole_mass: f64,
    pub half_length: f64,
    pub force_mag: f64,
    pub tau: f64,
    pub angle_limit: f64,
    pub position_limit: f64,
    pub horizon: usize,
    pub init_range: f64,
}

impl Default for CartPole {
    fn default() -> Self {
        CartPole {
            gravity: 9.8,
            cart_mass: 1.0,
            pole_mass: 0.1,
            half_length: 0.5,
            force_mag: 10.0,
            tau: 0.02,
            angle_limit: 15f64.to_radians(),
            position_limit: 2.4,
            horizon: 200,
            init_range: 0.05,
        }
    }
}

impl CartPole {
    pub fn new() -> Self {
        Self::default()
    }

    /// Applies one action. The step that crosses a limit still earns +1.
    pub fn advance(&self, s: &CartPoleState, action: usize) -> Result<Transition<CartPoleState>> {
        let force = match action {
            0 => -self.force_mag,
            1 => self.force_mag,
            _ => return Err(Error::argument(format!("cart-pole action must be 0 or 1, got {action}"))),
        };
        let total_mass = self.cart_mass + self.pole_mass;
        let pole_mass_length = self.pole_mass * self.half_length;
        let (sin, cos) = s.phi.sin_cos();
        let temp = (force + pole_mass_length * s.phi_dot * s.phi_dot * sin) / total_mass;
        let phi_acc = (self.gravity * sin - cos * temp)
            / (self.half_length * (4.0 / 3.0 - self.pole_mass * cos * cos / total_mass));
        let x_acc = temp - pole_mass_length * phi_acc * cos / total_mass;

        let next = CartPoleState {
            x: s.x + self.tau * s.x_dot,
            x_dot: s.x_dot + self.tau * x_acc,
            phi: s.phi + self.tau * s.phi_dot,
            phi_dot: s.phi_dot + self.tau * phi_acc,
            steps: s.steps + 1,
        };
        let terminal = self.failed(&next) || next.steps >= self.horizon;
        Ok(Transition { state: next, reward: 1.0, terminal })
    }

    pub fn failed(&self, s: &CartPoleState) -> bool {
        s.phi.abs() > self.angle_limit || s.x.abs() > self.position_limit
    }
}

impl Environment for CartPole {
    type State = CartPoleState;

    fn reset(&self, rng: &mut StreamRng) -> CartPoleState {
        let r = self.init_range;
        let mut draw = || rng.gen_range(-r..r);
        CartPoleState { x: draw(), x_dot: draw(), phi: draw(), phi_dot: draw(), steps: 0 }
    }

    fn step(&self, state: &CartPoleState, action: usize, _rng: &mut StreamRng) -> Result<Transition<CartPoleState>> {
        self.advance(state, action)
    }

    fn observe(&self, s: &CartPoleState) -> Observation {
        Observation::Continuous(vec![s.x, s.x_dot, s.phi, s.phi_dot])
    }

    fn observation_space(&self) -> ObservationSpace {
        ObservationSpace::Continuous(4)
    }

    fn action_count(&self) -> usize {
        2
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn reward_bound(&self) -> f64 {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn upright() -> CartPoleState {
        CartPoleState { x: 0.0, x_dot: 0.0, phi: 0.0, phi_dot: 0.0, steps: 0 }
    }

    #[test]
    fn upright_survives_alternating_pushes() {
        let env = CartPole::new();
        let mut s = upright();
        for a in [1, 0, 1, 0] {
            let t = env.advance(&s, a).unwrap();
            assert!(!t.terminal);
            assert_eq!(t.reward, 1.0);
            s = t.state;
        }
    }

    #[test]
    fn crossing_track_limit_terminates_with_reward() {
        let env = CartPole::new();
        let s = CartPoleState { x: 2.399, x_dot: 1.0, ..upright() };
        let t = env.advance(&s, 1).unwrap();
        assert!(t.state.x > 2.4);
        assert!(t.terminal);
        assert_eq!(t.reward, 1.0);
    }

    #[test]
    fn termination_is_exactly_the_three_conditions() {
        let env = CartPole::new();
        let limit = 15f64.to_radians();
        let cases = [
            (CartPoleState { phi: limit - 1e-3, phi_dot: 0.1, ..upright() }, true),
            (CartPoleState { phi: limit - 0.05, ..upright() }, false),
            (CartPoleState { phi: -limit + 1e-3, phi_dot: -0.1, ..upright() }, true),
            (CartPoleState { steps: 199, ..upright() }, true),
            (CartPoleState { steps: 198, ..upright() }, false),
        ];
        for (s, expected) in cases {
            let t = env.advance(&s, 0).unwrap();
            let by_rule = t.state.phi.abs() > limit || t.state.x.abs() > 2.4 || t.state.steps == 200;
            assert_eq!(t.terminal, by_rule);
            assert_eq!(t.terminal, expected, "{s:?}");
        }
    }

    #[test]
    fn rejects_bad_action() {
        assert!(matches!(CartPole::new().advance(&upright(), 2), Err(Error::Argument(_))));
    }
}
