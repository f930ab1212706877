//! Episodic MDPs, trajectories and the seeded rollout engine.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::policy::{ParamVector, Policy};
use crate::rng::{SeedTree, StreamRng};

/// What a policy sees at one time step.
#[derive(Debug, Clone, PartialEq)]
pub enum Observation {
    /// Index of a state in a finite MDP.
    Discrete(usize),
    /// Real-valued feature vector of a continuous-state MDP.
    Continuous(Vec<f64>),
}

/// Shape of an environment's observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObservationSpace {
    Discrete(usize),
    Continuous(usize),
}

/// Outcome of a single environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<S> {
    pub state: S,
    pub reward: f64,
    pub terminal: bool,
}

/// An episodic MDP with a discrete action set.
///
/// Implementations must be pure given the generator: the same `rng` state and
/// the same action sequence reproduce the same states and rewards bit for bit.
/// Rewards lie in `[-reward_bound, reward_bound]`.
pub trait Environment: Sync {
    /// Full simulator state. May carry more than the observation (a step
    /// counter, raw joint angles).
    type State: Clone + Send;

    fn reset(&self, rng: &mut StreamRng) -> Self::State;

    fn step(&self, state: &Self::State, action: usize, rng: &mut StreamRng) -> Result<Transition<Self::State>>;

    fn observe(&self, state: &Self::State) -> Observation;

    fn observation_space(&self) -> ObservationSpace;

    fn action_count(&self) -> usize;

    /// Maximum episode length H.
    fn horizon(&self) -> usize;

    /// Declared reward bound R.
    fn reward_bound(&self) -> f64;
}

/// One episode's observed states, actions and rewards.
///
/// Behaviour-policy probabilities are deliberately not stored: off-policy
/// estimators re-evaluate both policies on the raw `(s, a, r)` sequence.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub states: Vec<Observation>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    /// True when the environment signalled a terminal state, false when the
    /// episode was cut at the horizon.
    pub terminated: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn push(&mut self, state: Observation, action: usize, reward: f64) {
        self.states.push(state);
        self.actions.push(action);
        self.rewards.push(reward);
    }

    /// Undiscounted sum of rewards, the quantity plotted in learning curves.
    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }
}

/// Discount factor γ ∈ (0, 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discount(f64);

impl Discount {
    pub fn new(gamma: f64) -> Result<Self> {
        if gamma > 0.0 && gamma < 1.0 {
            Ok(Discount(gamma))
        } else {
            Err(Error::argument(format!("discount factor must lie in (0, 1), got {gamma}")))
        }
    }

    /// γ = 1, only meaningful for finite-horizon checks.
    pub fn undiscounted() -> Self {
        Discount(1.0)
    }

    pub fn gamma(&self) -> f64 {
        self.0
    }
}

/// R(τ) = Σ_h γ^h r_h over the realised steps.
pub fn discounted_return(traj: &Trajectory, discount: Discount) -> f64 {
    let gamma = discount.gamma();
    let mut weight = 1.0;
    let mut total = 0.0;
    for &r in &traj.rewards {
        total += weight * r;
        weight *= gamma;
    }
    total
}

/// Inverse-CDF draw from a probability vector: the first index whose
/// cumulative probability exceeds `u`. Rounding slack falls to the last index.
pub fn sample_index(probs: &[f64], u: f64) -> usize {
    let mut cumulative = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        cumulative += p;
        if u < cumulative {
            return i;
        }
    }
    probs.len().saturating_sub(1)
}

/// Samples one trajectory: `s_0 ~ ρ`, `a_h ~ π_θ(·|s_h)`, `s_{h+1} ~ P`,
/// stopping at the horizon or at the first terminal transition.
///
/// Each step draws one uniform for the action before the environment draws
/// whatever it needs for the transition.
pub fn rollout<E, P>(env: &E, policy: &P, theta: &ParamVector, rng: &mut StreamRng) -> Result<Trajectory>
where
    E: Environment + ?Sized,
    P: Policy + ?Sized,
{
    policy.check_params(theta)?;
    if policy.action_count() != env.action_count() {
        return Err(Error::config(format!(
            "policy has {} actions but the environment has {}",
            policy.action_count(),
            env.action_count()
        )));
    }
    let horizon = env.horizon();
    let mut traj = Trajectory::default();
    let mut state = env.reset(rng);
    for _ in 0..horizon {
        let obs = env.observe(&state);
        let probs = policy.action_distribution(theta, &obs)?;
        let action = sample_index(&probs, rng.gen::<f64>());
        let next = env.step(&state, action, rng)?;
        traj.push(obs, action, next.reward);
        if next.terminal {
            traj.terminated = true;
            break;
        }
        state = next.state;
    }
    Ok(traj)
}

/// Samples `n` trajectories; trajectory `i` uses stream `(batch, i)` of `seeds`.
///
/// Rollouts run in parallel on the current rayon pool and are collected in
/// index order, so the result does not depend on the number of threads.
pub fn sample_batch<E, P>(
    env: &E,
    policy: &P,
    theta: &ParamVector,
    n: usize,
    seeds: &SeedTree,
    batch: u64,
) -> Result<Vec<Trajectory>>
where
    E: Environment + ?Sized,
    P: Policy + ?Sized,
{
    if n == 0 {
        return Err(Error::argument("batch size must be at least 1"));
    }
    (0..n as u64).into_par_iter().map(|i| rollout(env, policy, theta, &mut seeds.trajectory(batch, i))).collect()
}

/// Hands out consecutive batch counters and counts episodes drawn.
#[derive(Debug, Clone)]
pub struct Sampler {
    seeds: SeedTree,
    next_batch: u64,
    episodes: u64,
}

impl Sampler {
    pub fn new(seeds: SeedTree) -> Self {
        Sampler { seeds, next_batch: 0, episodes: 0 }
    }

    pub fn seeds(&self) -> &SeedTree {
        &self.seeds
    }

    /// Index the next batch will use.
    pub fn cursor(&self) -> u64 {
        self.next_batch
    }

    /// Total trajectories drawn so far.
    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    pub fn draw<E, P>(&mut self, env: &E, policy: &P, theta: &ParamVector, n: usize) -> Result<Vec<Trajectory>>
    where
        E: Environment + ?Sized,
        P: Policy + ?Sized,
    {
        let batch = sample_batch(env, policy, theta, n, &self.seeds, self.next_batch)?;
        self.next_batch += 1;
        self.episodes += n as u64;
        Ok(batch)
    }
}
