//! Benchmark environments.
//!
//! Physical constants of the classic-control tasks:
//!
//! | task     | constant                    | value                |
//! |----------|-----------------------------|----------------------|
//! | CartPole | gravity                     | 9.8 m/s²             |
//! | CartPole | cart mass / pole mass       | 1.0 kg / 0.1 kg      |
//! | CartPole | pole half-length            | 0.5 m                |
//! | CartPole | force magnitude             | 10 N (action 0: −, 1: +) |
//! | CartPole | integration                 | explicit Euler, τ = 0.02 s |
//! | CartPole | failure                     | \|φ\| > 15°, \|x\| > 2.4 |
//! | CartPole | horizon / reward            | 200 / +1 per step    |
//! | CartPole | initial state               | each coordinate U(−0.05, 0.05) |
//! | Acrobot  | link lengths                | 1.0 m, 1.0 m         |
//! | Acrobot  | link masses                 | 1.0 kg, 1.0 kg       |
//! | Acrobot  | centre-of-mass positions    | 0.5 m, 0.5 m         |
//! | Acrobot  | link moments of inertia     | 1.0, 1.0             |
//! | Acrobot  | gravity                     | 9.8 m/s²             |
//! | Acrobot  | torques                     | action 0: −1, 1: 0, 2: +1 |
//! | Acrobot  | integration                 | one RK4 step, dt = 0.2 s |
//! | Acrobot  | velocity limits             | \|θ̇1\| ≤ 4π, \|θ̇2\| ≤ 9π |
//! | Acrobot  | goal                        | −cos θ1 − cos(θ1+θ2) > 1 |
//! | Acrobot  | horizon / reward            | 500 / −1 per step, 0 on reaching the goal |
//! | Acrobot  | initial state               | each of θ1, θ2, θ̇1, θ̇2 U(−0.1, 0.1) |
//!
//! The CartPole failure angle is 15° rather than the 12° used by some other
//! CartPole implementations.

mod acrobot;
mod cartpole;
mod tabular;

pub use acrobot::{Acrobot, AcrobotState};
pub use cartpole::{CartPole, CartPoleState};
pub use tabular::{TabularMdp, TabularState};
