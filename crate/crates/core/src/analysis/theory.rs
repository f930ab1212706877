//! Smoothness and variance constants of the convergence analysis, the
//! recommended (η, p) schedule and the average sample count.

use crate::error::{Error, Result};

/// Relative slack allowed when comparing η² against a bound, to absorb the
/// rounding of `sqrt` followed by squaring.
const ROUNDING_SLACK: f64 = 4.0 * f64::EPSILON;

/// Problem constants and the quantities derived from them.
///
/// Inputs: score bound G, score-Hessian bound M, reward bound R,
/// importance-weight variance bound W and the discount γ. σ (estimator
/// variance) and λ (gradient dominance) are carried as optional labelled
/// inputs only; nothing is derived from them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryConstants {
    pub g: f64,
    pub m: f64,
    pub r: f64,
    pub w: f64,
    pub gamma: f64,
    /// L = M·R/(1−γ)² + 2G²·R/(1−γ)³, the smoothness constant.
    pub smoothness: f64,
    /// C_g = G·R/(1−γ)², the bound on ‖g(τ|θ)‖.
    pub gradient_bound: f64,
    /// C_ω = 24·R·G²·(2G²+M)·(W+1)·γ/(1−γ)⁵.
    pub weight_term: f64,
    /// C = 2(L² + C_ω).
    pub c: f64,
    pub sigma: Option<f64>,
    pub lambda: Option<f64>,
}

pub fn theory_constants(g: f64, m: f64, r: f64, w: f64, gamma: f64) -> Result<TheoryConstants> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::argument(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    for (name, v) in [("G", g), ("M", m), ("R", r), ("W", w)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::argument(format!("{name} must be a finite non-negative number, got {v}")));
        }
    }
    let q = 1.0 - gamma;
    let smoothness = m * r / q.powi(2) + 2.0 * g * g * r / q.powi(3);
    let gradient_bound = g * r / q.powi(2);
    let weight_term = 24.0 * r * g * g * (2.0 * g * g + m) * (w + 1.0) * gamma / q.powi(5);
    let c = 2.0 * (smoothness * smoothness + weight_term);
    Ok(TheoryConstants { g, m, r, w, gamma, smoothness, gradient_bound, weight_term, c, sigma: None, lambda: None })
}

impl TheoryConstants {
    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = Some(sigma);
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = Some(lambda);
        self
    }
}

/// Which of the two step-size bounds is the smaller one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BindingBound {
    /// p/(1−p) · B/(2C)
    Variance,
    /// 1/(4L²)
    Smoothness,
}

/// Evaluation of η² ≤ min{p/(1−p)·B/(2C), 1/(4L²)}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSizeCheck {
    pub eta_squared: f64,
    /// `f64::INFINITY` when p = 1.
    pub variance_bound: f64,
    /// `f64::INFINITY` when L = 0.
    pub smoothness_bound: f64,
    pub binding: BindingBound,
    pub feasible: bool,
}

pub fn check_step_size(constants: &TheoryConstants, eta: f64, p: f64, small_batch: usize) -> Result<StepSizeCheck> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::argument(format!("p must lie in (0, 1], got {p}")));
    }
    if constants.c <= 0.0 {
        return Err(Error::argument("C must be positive"));
    }
    let variance_bound =
        if p == 1.0 { f64::INFINITY } else { p / (1.0 - p) * small_batch as f64 / (2.0 * constants.c) };
    let l2 = constants.smoothness * constants.smoothness;
    let smoothness_bound = if l2 == 0.0 { f64::INFINITY } else { 1.0 / (4.0 * l2) };
    let binding = if smoothness_bound < variance_bound { BindingBound::Smoothness } else { BindingBound::Variance };
    let eta_squared = eta * eta;
    let feasible = eta_squared <= variance_bound.min(smoothness_bound) * (1.0 + ROUNDING_SLACK);
    Ok(StepSizeCheck { eta_squared, variance_bound, smoothness_bound, binding, feasible })
}

/// η = √B/√(2CN) and p = 1/N, with the step-size condition evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Recommendation {
    pub eta: f64,
    pub p: f64,
    pub check: StepSizeCheck,
}

pub fn recommended_hyperparams(
    constants: &TheoryConstants,
    small_batch: usize,
    large_batch: usize,
) -> Result<Recommendation> {
    if small_batch == 0 || small_batch > large_batch {
        return Err(Error::argument(format!("need 1 ≤ B ≤ N, got B = {small_batch}, N = {large_batch}")));
    }
    if constants.c <= 0.0 {
        return Err(Error::argument("C must be positive"));
    }
    let eta = (small_batch as f64).sqrt() / (2.0 * constants.c * large_batch as f64).sqrt();
    let p = 1.0 / large_batch as f64;
    let check = check_step_size(constants, eta, p, small_batch)?;
    Ok(Recommendation { eta, p, check })
}

/// Expected trajectories consumed by `iterations` switched updates:
/// T·(pN + (1−p)B).
pub fn average_samples(p: f64, large_batch: usize, small_batch: usize, iterations: usize) -> f64 {
    iterations as f64 * (p * large_batch as f64 + (1.0 - p) * small_batch as f64)
}
