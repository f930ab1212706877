use crate::envs::TabularMdp;
use crate::error::{Error, Result};
use crate::estimators::{contribution, offpolicy_contribution, EstimatorKind};
use crate::mdp::{discounted_return, Discount, Environment, Observation, Trajectory};
use crate::policy::{ParamVector, Policy};

pub const DEFAULT_ENUMERATION_CAP: u128 = 10_000_000;

/// Exact quantities obtained by summing over every trajectory of a finite MDP.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactGradientReport {
    /// ∇V(θ) = Σ_τ p(τ|θ) ∇log p(τ|θ) R(τ).
    pub gradient: ParamVector,
    /// V(θ) = Σ_τ p(τ|θ) R(τ).
    pub value: f64,
    /// Number of trajectories with non-zero probability.
    pub trajectories: u64,
    /// Σ_τ p(τ|θ); 1 up to rounding.
    pub probability_mass: f64,
    pub expected_reinforce: ParamVector,
    pub expected_gpomdp: ParamVector,
    /// Trace of the covariance of the per-trajectory REINFORCE contribution.
    pub variance_reinforce: f64,
    pub variance_gpomdp: f64,
    /// Present when a behaviour policy was supplied.
    pub offpolicy: Option<OffPolicyExpectation>,
}

/// Expectations under the behaviour distribution p(·|θ_b) of the
/// importance-weighted estimators targeting θ.
#[derive(Debug, Clone, PartialEq)]
pub struct OffPolicyExpectation {
    pub behavior: ParamVector,
    /// Σ_τ p(τ|θ_b) ω(τ); 1 up to rounding.
    pub weight_mean: f64,
    pub expected_reinforce: ParamVector,
    pub expected_gpomdp: ParamVector,
    pub variance_reinforce: f64,
    pub variance_gpomdp: f64,
}

/// Depth-first trajectory enumeration with a size cap.
#[derive(Debug, Clone)]
pub struct Enumerator<'a> {
    mdp: &'a TabularMdp,
    cap: u128,
}

/// Running Σ p·x and Σ p·‖x‖².
struct Moments {
    mean: Vec<f64>,
    second: f64,
}

impl Moments {
    fn new(d: usize) -> Self {
        Moments { mean: vec![0.0; d], second: 0.0 }
    }

    fn add(&mut self, p: f64, x: &ParamVector) {
        for (m, v) in self.mean.iter_mut().zip(x.iter()) {
            *m += p * v;
        }
        self.second += p * x.norm_squared();
    }

    fn finish(self) -> (ParamVector, f64) {
        let mean = ParamVector::from_vec(self.mean);
        let var = self.second - mean.norm_squared();
        (mean, var)
    }
}

impl<'a> Enumerator<'a> {
    pub fn new(mdp: &'a TabularMdp) -> Self {
        Enumerator { mdp, cap: DEFAULT_ENUMERATION_CAP }
    }

    pub fn with_cap(mut self, cap: u128) -> Self {
        self.cap = cap;
        self
    }

    /// Upper bound (n_s·n_a)^H on the number of trajectories.
    pub fn trajectory_bound(&self) -> u128 {
        let per_step = (self.mdp.states() * self.mdp.actions()) as u128;
        let mut bound: u128 = 1;
        for _ in 0..self.mdp.horizon() {
            bound = bound.saturating_mul(per_step);
        }
        bound
    }

    fn check_cap(&self) -> Result<()> {
        let required = self.trajectory_bound();
        if required > self.cap {
            Err(Error::EnumerationCap { required, cap: self.cap })
        } else {
            Ok(())
        }
    }

    /// Visits every full-horizon trajectory in lexicographic
    /// `(s_0, a_0, s_1, a_1, …)` order together with its probability under
    /// each parameter vector in `thetas`. Zero-probability transitions and
    /// initial states are pruned.
    pub fn visit<P, F>(&self, policy: &P, thetas: &[&ParamVector], mut visit: F) -> Result<()>
    where
        P: Policy + ?Sized,
        F: FnMut(&Trajectory, &[f64]) -> Result<()>,
    {
        self.check_cap()?;
        let mdp = self.mdp;
        // π_θ(·|s) for every θ and state.
        let tables = thetas
            .iter()
            .map(|theta| {
                (0..mdp.states())
                    .map(|s| policy.action_distribution(theta, &Observation::Discrete(s)))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;

        struct Walk<'w, F> {
            mdp: &'w TabularMdp,
            tables: &'w [Vec<Vec<f64>>],
            traj: Trajectory,
            visit: F,
        }

        impl<F: FnMut(&Trajectory, &[f64]) -> Result<()>> Walk<'_, F> {
            fn descend(&mut self, state: usize, probs: Vec<f64>) -> Result<()> {
                let h = self.traj.len();
                for a in 0..self.mdp.actions() {
                    let next_probs: Vec<f64> =
                        probs.iter().zip(self.tables).map(|(p, table)| p * table[state][a]).collect();
                    self.traj.push(Observation::Discrete(state), a, self.mdp.reward(state, a));
                    if h + 1 == self.mdp.horizon() {
                        (self.visit)(&self.traj, &next_probs)?;
                    } else {
                        for (next, &pt) in self.mdp.transition(state, a).iter().enumerate() {
                            if pt > 0.0 {
                                self.descend(next, next_probs.iter().map(|p| p * pt).collect())?;
                            }
                        }
                    }
                    self.traj.states.pop();
                    self.traj.actions.pop();
                    self.traj.rewards.pop();
                }
                Ok(())
            }
        }

        let mut walk = Walk { mdp, tables: &tables, traj: Trajectory::default(), visit: &mut visit };
        walk.traj.terminated = true;
        for (s0, &p0) in mdp.initial().iter().enumerate() {
            if p0 > 0.0 {
                walk.descend(s0, vec![p0; thetas.len()])?;
            }
        }
        Ok(())
    }

    pub fn exact_gradient<P: Policy + ?Sized>(
        &self,
        policy: &P,
        theta: &ParamVector,
        discount: Discount,
        behavior: Option<&ParamVector>,
    ) -> Result<ExactGradientReport> {
        let d = policy.param_dim();
        let mut thetas = vec![theta];
        if let Some(b) = behavior {
            thetas.push(b);
        }
        let mut gradient = vec![0.0; d];
        let mut value = 0.0;
        let mut mass = 0.0;
        let mut count = 0u64;
        let mut reinforce = Moments::new(d);
        let mut gpomdp = Moments::new(d);
        let mut off = behavior.map(|_| (0.0, Moments::new(d), Moments::new(d)));
        let mut score = vec![0.0; d];

        self.visit(policy, &thetas, |traj, probs| {
            let p = probs[0];
            count += 1;
            mass += p;
            let ret = discounted_return(traj, discount);
            value += p * ret;
            // ∇log p(τ|θ) = Σ_h ∇log π_θ(a_h|s_h); transitions do not depend on θ.
            score.fill(0.0);
            for (obs, &a) in traj.states.iter().zip(&traj.actions) {
                policy.accumulate_score(theta.as_slice(), obs, a, 1.0, &mut score)?;
            }
            for (g, s) in gradient.iter_mut().zip(&score) {
                *g += p * s * ret;
            }
            reinforce.add(p, &contribution(EstimatorKind::Reinforce, policy, theta, traj, discount)?);
            gpomdp.add(p, &contribution(EstimatorKind::Gpomdp, policy, theta, traj, discount)?);
            if let (Some(b), Some((weight_mean, off_r, off_g))) = (behavior, off.as_mut()) {
                let pb = probs[1];
                *weight_mean += pb * (p / pb);
                off_r.add(
                    pb,
                    &offpolicy_contribution(EstimatorKind::Reinforce, policy, theta, b, traj, discount, None)?,
                );
                off_g.add(pb, &offpolicy_contribution(EstimatorKind::Gpomdp, policy, theta, b, traj, discount, None)?);
            }
            Ok(())
        })?;

        let (expected_reinforce, variance_reinforce) = reinforce.finish();
        let (expected_gpomdp, variance_gpomdp) = gpomdp.finish();
        let offpolicy = match (behavior, off) {
            (Some(b), Some((weight_mean, off_r, off_g))) => {
                let (er, vr) = off_r.finish();
                let (eg, vg) = off_g.finish();
                Some(OffPolicyExpectation {
                    behavior: b.clone(),
                    weight_mean,
                    expected_reinforce: er,
                    expected_gpomdp: eg,
                    variance_reinforce: vr,
                    variance_gpomdp: vg,
                })
            }
            _ => None,
        };
        Ok(ExactGradientReport {
            gradient: ParamVector::from_vec(gradient),
            value,
            trajectories: count,
            probability_mass: mass,
            expected_reinforce,
            expected_gpomdp,
            variance_reinforce,
            variance_gpomdp,
            offpolicy,
        })
    }
}

/// Calls `visit` for every trajectory of `mdp` with its probability under `theta`.
pub fn enumerate_trajectories<P, F>(mdp: &TabularMdp, policy: &P, theta: &ParamVector, mut visit: F) -> Result<()>
where
    P: Policy + ?Sized,
    F: FnMut(&Trajectory, f64) -> Result<()>,
{
    Enumerator::new(mdp).visit(policy, &[theta], |t, p| visit(t, p[0]))
}

/// Exact gradient, value and on-policy estimator moments at `theta`.
pub fn exact_gradient<P: Policy + ?Sized>(
    mdp: &TabularMdp,
    policy: &P,
    theta: &ParamVector,
    discount: Discount,
) -> Result<ExactGradientReport> {
    Enumerator::new(mdp).exact_gradient(policy, theta, discount, None)
}

/// V(θ) by backward dynamic programming over the horizon.
pub fn exact_value<P: Policy + ?Sized>(
    mdp: &TabularMdp,
    policy: &P,
    theta: &ParamVector,
    discount: Discount,
) -> Result<f64> {
    let gamma = discount.gamma();
    let pi = (0..mdp.states())
        .map(|s| policy.action_distribution(theta, &Observation::Discrete(s)))
        .collect::<Result<Vec<_>>>()?;
    let mut next = vec![0.0; mdp.states()];
    for _ in 0..mdp.horizon() {
        next = (0..mdp.states())
            .map(|s| {
                (0..mdp.actions())
                    .map(|a| {
                        let future: f64 = mdp.transition(s, a).iter().zip(&next).map(|(p, v)| p * v).sum();
                        pi[s][a] * (mdp.reward(s, a) + gamma * future)
                    })
                    .sum()
            })
            .collect();
    }
    Ok(mdp.initial().iter().zip(&next).map(|(r, v)| r * v).sum())
}

/// Trace of the covariance of one on-policy estimator's contribution.
pub fn estimator_variance<P: Policy + ?Sized>(
    mdp: &TabularMdp,
    policy: &P,
    theta: &ParamVector,
    discount: Discount,
    kind: EstimatorKind,
) -> Result<f64> {
    let d = policy.param_dim();
    let mut moments = Moments::new(d);
    enumerate_trajectories(mdp, policy, theta, |t, p| {
        moments.add(p, &contribution(kind, policy, theta, t, discount)?);
        Ok(())
    })?;
    Ok(moments.finish().1)
}

/// Trace of the covariance of an importance-weighted estimator targeting
/// `target` under trajectories drawn from `behavior`.
pub fn offpolicy_estimator_variance<P: Policy + ?Sized>(
    mdp: &TabularMdp,
    policy: &P,
    target: &ParamVector,
    behavior: &ParamVector,
    discount: Discount,
    kind: EstimatorKind,
) -> Result<f64> {
    let mut moments = Moments::new(policy.param_dim());
    enumerate_trajectories(mdp, policy, behavior, |t, p| {
        moments.add(p, &offpolicy_contribution(kind, policy, target, behavior, t, discount, None)?);
        Ok(())
    })?;
    Ok(moments.finish().1)
}
