//! Ground truth for finite MDPs and the convergence-theory formulas.

mod enumerate;
mod theory;

pub use enumerate::{
    enumerate_trajectories, estimator_variance, exact_gradient, exact_value, offpolicy_estimator_variance, Enumerator,
    ExactGradientReport, OffPolicyExpectation, DEFAULT_ENUMERATION_CAP,
};
pub use theory::{
    average_samples, check_step_size, recommended_hyperparams, theory_constants, BindingBound, Recommendation,
    StepSizeCheck, TheoryConstants,
};
