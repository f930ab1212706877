//! Theory constants and the recommended schedule, as printable text.

use std::fmt::Write;

use vrpg_core::analysis::{average_samples, check_step_size, recommended_hyperparams, theory_constants};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantsInput {
    pub g: f64,
    pub m: f64,
    pub r: f64,
    pub w: f64,
    pub gamma: f64,
    pub small_batch: usize,
    pub large_batch: usize,
    /// Also check a user-chosen (η, p).
    pub eta: Option<f64>,
    pub p: Option<f64>,
    /// Iterations for the average-sample count.
    pub iterations: Option<usize>,
}

pub fn constants_report(input: &ConstantsInput) -> Result<String> {
    let c = theory_constants(input.g, input.m, input.r, input.w, input.gamma)?;
    let rec = recommended_hyperparams(&c, input.small_batch, input.large_batch)?;
    let mut out = String::new();
    let _ = writeln!(out, "G = {}  M = {}  R = {}  W = {}  gamma = {}", c.g, c.m, c.r, c.w, c.gamma);
    let _ = writeln!(out, "L       = {}", c.smoothness);
    let _ = writeln!(out, "C_g     = {}", c.gradient_bound);
    let _ = writeln!(out, "C_omega = {}", c.weight_term);
    let _ = writeln!(out, "C       = {}", c.c);
    let _ = writeln!(
        out,
        "recommended eta = {}  p = {}  (B = {}, N = {})",
        rec.eta, rec.p, input.small_batch, input.large_batch
    );
    let _ = writeln!(
        out,
        "  eta^2 = {:e}  variance bound = {:e}  smoothness bound = {:e}  binding = {:?}  feasible = {}",
        rec.check.eta_squared,
        rec.check.variance_bound,
        rec.check.smoothness_bound,
        rec.check.binding,
        rec.check.feasible
    );
    if let Some(eta) = input.eta {
        let p = input.p.unwrap_or(rec.p);
        let chk = check_step_size(&c, eta, p, input.small_batch)?;
        let _ = writeln!(
            out,
            "given eta = {eta}  p = {p}: eta^2 = {:e}  bound = {:e}  feasible = {}",
            chk.eta_squared,
            chk.variance_bound.min(chk.smoothness_bound),
            chk.feasible
        );
    }
    if let Some(t) = input.iterations {
        let p = input.p.unwrap_or(rec.p);
        let _ = writeln!(
            out,
            "average samples over T = {t}: {}",
            average_samples(p, input.large_batch, input.small_batch, t)
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spot_values_are_printed() {
        let input = ConstantsInput {
            g: 1.0,
            m: 1.0,
            r: 1.0,
            w: 0.0,
            gamma: 0.5,
            small_batch: 5,
            large_batch: 100,
            eta: None,
            p: None,
            iterations: Some(1000),
        };
        let text = constants_report(&input).unwrap();
        assert!(text.contains("L       = 20\n"), "{text}");
        assert!(text.contains("C       = 3104\n"), "{text}");
        assert!(text.contains("p = 0.01"), "{text}");
        assert!(text.contains("5950"), "{text}");
    }

    #[test]
    fn invalid_inputs_error() {
        let input = ConstantsInput {
            g: 1.0,
            m: 1.0,
            r: 1.0,
            w: 0.0,
            gamma: 1.0,
            small_batch: 5,
            large_batch: 100,
            eta: None,
            p: None,
            iterations: None,
        };
        assert!(constants_report(&input).is_err());
    }
}
