//! Variance-reduced REINFORCE-type policy gradient methods.
//!
//! The crate is organised bottom-up:
//!
//! - [`mdp`]: episodic MDP abstraction, trajectories, seeded rollouts.
//! - [`envs`]: CartPole, Acrobot and finite tabular MDPs.
//! - [`policy`]: tabular and MLP softmax policies with exact score functions.
//! - [`estimators`]: on- and off-policy REINFORCE / GPOMDP gradient estimators.
//! - [`optimizers`]: GPOMDP, SVRPG, SRVRPG, STORM-PG and PAGE-PG.
//! - [`analysis`]: exact gradients by enumeration, exact values by dynamic
//!   programming, theory constants and step-size recommendations.

pub mod analysis;
pub mod envs;
pub mod error;
pub mod estimators;
pub mod fixtures;
pub mod mdp;
pub mod optimizers;
pub mod policy;
pub mod rng;

pub use error::{Error, Result};
pub use mdp::{Discount, Environment, Observation, Trajectory};
pub use policy::{ParamVector, Policy, PolicySpec};
