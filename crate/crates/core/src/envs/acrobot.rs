use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};
use crate::mdp::{Environment, Observation, ObservationSpace, Transition};
use crate::rng::StreamRng;

/// Joint angles (θ1 from hanging straight down, θ2 relative to link 1) and
/// their velocities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcrobotState {
    pub theta1: f64,
    pub theta2: f64,
    pub dtheta1: f64,
    pub dtheta2: f64,
    pub steps: usize,
}

/// Two-link underactuated pendulum with torque on the middle joint.
#[derive(Debug, Clone, PartialEq)]
pub struct Acrobot {
    pub link_length_1: f64,
    pub link_length_2: f64,
    pub link_mass_1: f64,
    pub link_mass_2: f64,
    pub link_com_1: f64,
    pub link_com_2: f64,
    pub link_moi: f64,
    pub gravity: f64,
    pub dt: f64,
    pub max_vel_1: f64,
    pub max_vel_2: f64,
    pub torques: [f64; 3],
    pub horizon: usize,
    pub init_range: f64,
}

impl Default for Acrobot {
    fn default() -> Self {
        Acrobot {
            link_length_1: 1.0,
            link_length_2: 1.0,
            link_mass_1: 1.0,
            link_mass_2: 1.0,
            link_com_1: 0.5,
            link_com_2: 0.5,
            link_moi: 1.0,
            gravity: 9.8,
            dt: 0.2,
            max_vel_1: 4.0 * PI,
            max_vel_2: 9.0 * PI,
            torques: [-1.0, 0.0, 1.0],
            horizon: 500,
            init_range: 0.1,
        }
    }
}

fn wrap(x: f64) -> f64 {
    let diff = 2.0 * PI;
    let mut x = x;
    while x > PI {
        x -= diff;
    }
    while x < -PI {
        x += diff;
    }
    x
}

impl Acrobot {
    pub fn new() -> Self {
        Self::default()
    }

    /// Time derivative of `[θ1, θ2, θ̇1, θ̇2]` under constant torque.
    pub fn derivatives(&self, s: [f64; 4], torque: f64) -> [f64; 4] {
        let (m1, m2) = (self.link_mass_1, self.link_mass_2);
        let l1 = self.link_length_1;
        let (lc1, lc2) = (self.link_com_1, self.link_com_2);
        let (i1, i2) = (self.link_moi, self.link_moi);
        let g = self.gravity;
        let [theta1, theta2, dtheta1, dtheta2] = s;

        let d1 = m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * theta2.cos()) + i1 + i2;
        let d2 = m2 * (lc2 * lc2 + l1 * lc2 * theta2.cos()) + i2;
        let phi2 = m2 * lc2 * g * (theta1 + theta2 - PI / 2.0).cos();
        let phi1 = -m2 * l1 * lc2 * dtheta2 * dtheta2 * theta2.sin()
            - 2.0 * m2 * l1 * lc2 * dtheta2 * dtheta1 * theta2.sin()
            + (m1 * lc1 + m2 * l1) * g * (theta1 - PI / 2.0).cos()
            + phi2;
        let ddtheta2 = (torque + d2 / d1 * phi1 - m2 * l1 * lc2 * dtheta1 * dtheta1 * theta2.sin() - phi2)
            / (m2 * lc2 * lc2 + i2 - d2 * d2 / d1);
        let ddtheta1 = -(d2 * ddtheta2 + phi1) / d1;
        [dtheta1, dtheta2, ddtheta1, ddtheta2]
    }

    /// Total mechanical energy (kinetic plus gravitational, zero at the pivot).
    pub fn energy(&self, s: &AcrobotState) -> f64 {
        let (m1, m2) = (self.link_mass_1, self.link_mass_2);
        let l1 = self.link_length_1;
        let (lc1, lc2) = (self.link_com_1, self.link_com_2);
        let (i1, i2) = (self.link_moi, self.link_moi);
        let c2 = s.theta2.cos();
        let d1 = m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * c2) + i1 + i2;
        let d2 = m2 * (lc2 * lc2 + l1 * lc2 * c2) + i2;
        let d3 = m2 * lc2 * lc2 + i2;
        let kinetic = 0.5 * d1 * s.dtheta1 * s.dtheta1 + d2 * s.dtheta1 * s.dtheta2 + 0.5 * d3 * s.dtheta2 * s.dtheta2;
        let y1 = -lc1 * s.theta1.cos();
        let y2 = -l1 * s.theta1.cos() - lc2 * (s.theta1 + s.theta2).cos();
        kinetic + self.gravity * (m1 * y1 + m2 * y2)
    }

    pub fn goal_reached(&self, s: &AcrobotState) -> bool {
        -s.theta1.cos() - (s.theta2 + s.theta1).cos() > 1.0
    }

    fn rk4(&self, y0: [f64; 4], torque: f64) -> [f64; 4] {
        let dt = self.dt;
        let add =
            |y: [f64; 4], k: [f64; 4], h: f64| [y[0] + h * k[0], y[1] + h * k[1], y[2] + h * k[2], y[3] + h * k[3]];
        let k1 = self.derivatives(y0, torque);
        let k2 = self.derivatives(add(y0, k1, dt / 2.0), torque);
        let k3 = self.derivatives(add(y0, k2, dt / 2.0), torque);
        let k4 = self.derivatives(add(y0, k3, dt), torque);
        let mut out = [0.0; 4];
        for i in 0..4 {
            out[i] = y0[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        out
    }

    /// One RK4 step with angle wrapping and velocity clipping.
    pub fn advance(&self, s: &AcrobotState, action: usize) -> Result<Transition<AcrobotState>> {
        let torque = *self
            .torques
            .get(action)
            .ok_or_else(|| Error::argument(format!("acrobot action must be 0, 1 or 2, got {action}")))?;
        let [t1, t2, d1, d2] = self.rk4([s.theta1, s.theta2, s.dtheta1, s.dtheta2], torque);
        let next = AcrobotState {
            theta1: wrap(t1),
            theta2: wrap(t2),
            dtheta1: d1.clamp(-self.max_vel_1, self.max_vel_1),
            dtheta2: d2.clamp(-self.max_vel_2, self.max_vel_2),
            steps: s.steps + 1,
        };
        let goal = self.goal_reached(&next);
        Ok(Transition {
            state: next,
            reward: if goal { 0.0 } else { -1.0 },
            terminal: goal || next.steps >= self.horizon,
        })
    }
}

impl Environment for Acrobot {
    type State = AcrobotState;

    fn reset(&self, rng: &mut StreamRng) -> AcrobotState {
        let r = self.init_range;
        let mut draw = || rng.gen_range(-r..r);
        AcrobotState { theta1: draw(), theta2: draw(), dtheta1: draw(), dtheta2: draw(), steps: 0 }
    }

    fn step(&self, state: &AcrobotState, action: usize, _rng: &mut StreamRng) -> Result<Transition<AcrobotState>> {
        self.advance(state, action)
    }

    fn observe(&self, s: &AcrobotState) -> Observation {
        Observation::Continuous(vec![
            s.theta1.cos(),
            s.theta1.sin(),
            s.theta2.cos(),
            s.theta2.sin(),
            s.dtheta1,
            s.dtheta2,
        ])
    }

    fn observation_space(&self) -> ObservationSpace {
        ObservationSpace::Continuous(6)
    }

    fn action_count(&self) -> usize {
        3
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

    fn rest() -> AcrobotState {
        AcrobotState { theta1: 0.0, theta2: 0.0, dtheta1: 0.0, dtheta2: 0.0, steps: 0 }
    }

    #[test]
    fn hanging_rest_is_an_equilibrium() {
        let env = Acrobot::new();
        let t = env.advance(&rest(), 1).unwrap();
        assert!(t.state.theta1.abs() < 1e-12 && t.state.theta2.abs() < 1e-12);
        assert!(t.state.dtheta1.abs() < 1e-12 && t.state.dtheta2.abs() < 1e-12);
        assert_eq!(t.reward, -1.0);
        assert!(!t.terminal);
    }

    #[test]
    fn idle_episode_runs_to_horizon() {
        let env = Acrobot::new();
        let mut s = rest();
        let mut total = 0.0;
        for step in 1..=500 {
            let t = env.advance(&s, 1).unwrap();
            total += t.reward;
            assert_eq!(t.terminal, step == 500);
            s = t.state;
        }
        assert_eq!(total, -500.0);
    }

    #[test]
    fn zero_torque_energy_drift_is_small() {
        // Documented bound: at dt = 0.2 and amplitudes ≤ 0.3 rad, one RK4 step
        // changes the energy by less than 1e-3 J.
        let env = Acrobot::new();
        let mut s = AcrobotState { theta1: 0.3, theta2: -0.2, dtheta1: 0.1, dtheta2: 0.0, steps: 0 };
        for _ in 0..200 {
            let before = env.energy(&s);
            s = env.advance(&s, 1).unwrap().state;
            assert!((env.energy(&s) - before).abs() < 1e-3, "drift {}", env.energy(&s) - before);
        }
    }

    #[test]
    fn goal_height_terminates_with_zero_reward() {
        let env = Acrobot::new();
        let s = AcrobotState { theta1: PI, theta2: 0.0, ..rest() };
        assert!(env.goal_reached(&s));
        let t = env.advance(&AcrobotState { theta1: PI - 0.01, ..rest() }, 1).unwrap();
        assert!(t.terminal);
        assert_eq!(t.reward, 0.0);
    }

    #[test]
    fn rejects_bad_action() {
        assert!(matches!(Acrobot::new().advance(&rest(), 3), Err(Error::Argument(_))));
    }
}
