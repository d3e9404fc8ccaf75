//! Candidate nonlinearities `f: [0, inf) -> [0, inf)`: parsing, evaluation,
//! the monotonicity audit and the ratio envelope `F(s) = sup f(t)/t`.

pub mod audit;
pub mod builtin;
pub mod envelope;
pub mod expr;

pub use audit::{monotonicity_audit, MonotonicityAudit, DEFAULT_AUDIT_SAMPLES};
pub use builtin::{builtin_by_name, builtin_family, log_family_beta_max, log_family_lambda, Family};
pub use envelope::{sup_ratio_envelope, EnvelopeOrigin, RatioEnvelope};
pub use expr::{Node, NonlinearityExpr};

/// `n` points from `lo` to `hi` (both included) with a constant ratio.
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo && n >= 2);
    let step = (hi / lo).ln() / (n - 1) as f64;
    let mut grid: Vec<f64> = (0..n).map(|i| lo * (step * i as f64).exp()).collect();
    grid[0] = lo;
    grid[n - 1] = hi;
    grid
}
