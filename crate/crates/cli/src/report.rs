//! `verify-theory`: randomized audits of the inequalities, as JSON.

use bomuse_core::theory::{
    audit_hadamard_bounds, audit_mean_monotonicity, audit_variance_bracket, generalized_mean, AuditReport, MeanOrder,
};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct TheoryReport {
    pub seed: u64,
    pub audits: Vec<AuditReport>,
    pub hard_violations: usize,
    pub passed: bool,
}

/// Stand-in mean that reverses the order of monotonicity, for checking that
/// the audits can fail at all.
pub fn faulty_mean(order: MeanOrder<f64>, a: &[f64]) -> bomuse_core::Result<f64> {
    generalized_mean(MeanOrder(-order.0), a)
}

pub fn verify_theory(trials: usize, bracket_instances: usize, seed: u64, faulty: bool) -> bomuse_core::Result<TheoryReport> {
    let mean: &bomuse_core::theory::MeanFn<f64> = if faulty { &faulty_mean } else { &generalized_mean };
    let mut audits = vec![
        audit_mean_monotonicity(trials, seed, mean)?,
        audit_hadamard_bounds(trials, seed.wrapping_add(1), mean)?,
    ];
    let (upper, lower) = audit_variance_bracket(bracket_instances, seed.wrapping_add(2))?;
    audits.push(upper);
    audits.push(lower);
    let hard_violations = audits.iter().filter(|a| a.hard).map(|a| a.violations).sum();
    Ok(TheoryReport { seed, audits, hard_violations, passed: hard_violations == 0 })
}
