use serde::Serialize;

use super::expr::NonlinearityExpr;
use super::geometric_grid;
use crate::error::{Error, Result};

/// Relative tolerance for the non-decrease check.
pub const AUDIT_TOLERANCE: f64 = 1e-10;
/// Smallest positive audit abscissa.
pub const AUDIT_FLOOR: f64 = 1e-8;
pub const DEFAULT_AUDIT_SAMPLES: usize = 4000;

const REFINE_POINTS: usize = 64;
const JUMP_TRIGGER: f64 = 0.1;
const JUMP_BISECTIONS: usize = 48;
const JUMP_RESIDUAL: f64 = 1e-3;

#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityAudit {
    pub sample_grid: Vec<f64>,
    pub is_nondecreasing: bool,
    /// `(s1, s2)` with `s1 < s2` and `f(s1) > f(s2) + tolerance`.
    pub first_violation: Option<(f64, f64)>,
    pub nonneg: bool,
    pub first_negative: Option<f64>,
    /// Adjacent samples whose gap does not shrink under bisection.
    pub suspected_jumps: Vec<(f64, f64)>,
    pub tolerance: f64,
}

impl MonotonicityAudit {
    pub fn passed(&self) -> bool {
        self.is_nondecreasing && self.nonneg
    }

    pub fn require_passed(&self) -> Result<()> {
        if !self.nonneg {
            return Err(Error::AuditFailed(format!(
                "negative value at s = {}",
                self.first_negative.unwrap_or(f64::NAN)
            )));
        }
        if let Some((a, b)) = self.first_violation {
            return Err(Error::AuditFailed(format!(
                "f decreases between s = {a} and s = {b}"
            )));
        }
        Ok(())
    }
}

fn violates(lo: f64, hi: f64) -> bool {
    lo.is_finite() && lo > hi + AUDIT_TOLERANCE * lo.abs().max(1.0)
}

/// Samples `f` on `{0} ∪` a geometric grid over `[1e-8, s_max]` and checks
/// sign and non-decrease, refining around any detected dip.
pub fn monotonicity_audit(
    expr: &NonlinearityExpr,
    s_max: f64,
    n_samples: usize,
) -> Result<MonotonicityAudit> {
    if !(s_max > 0.0) {
        return Err(Error::param("s_max", "must be positive"));
    }
    if n_samples < 2 {
        return Err(Error::param("n_samples", "need at least two samples"));
    }
    let mut grid = vec![0.0];
    if s_max > AUDIT_FLOOR {
        grid.extend(geometric_grid(AUDIT_FLOOR, s_max, n_samples));
    } else {
        grid.push(s_max);
    }
    let values = grid
        .iter()
        .map(|&s| expr.eval_signed(s))
        .collect::<Result<Vec<_>>>()?;

    let first_negative = grid
        .iter()
        .zip(&values)
        .find(|(_, v)| **v < 0.0)
        .map(|(s, _)| *s);

    let mut first_violation = None;
    for i in 0..values.len() - 1 {
        if violates(values[i], values[i + 1]) {
            let lo = if i > 0 { grid[i - 1] } else { grid[i] };
            let hi = grid[(i + 2).min(grid.len() - 1)];
            first_violation = Some(refine_dip(expr, lo, hi)?.unwrap_or((grid[i], grid[i + 1])));
            break;
        }
    }

    let mut suspected_jumps = Vec::new();
    for i in 0..values.len() - 1 {
        let (a, b) = (values[i], values[i + 1]);
        if !a.is_finite() || !b.is_finite() {
            continue;
        }
        let scale = a.abs().max(b.abs());
        if scale > 0.0 && (b - a).abs() > JUMP_TRIGGER * scale {
            if let Some(pair) = persistent_jump(expr, grid[i], grid[i + 1])? {
                suspected_jumps.push(pair);
            }
        }
    }

    Ok(MonotonicityAudit {
        sample_grid: grid,
        is_nondecreasing: first_violation.is_none(),
        first_violation,
        nonneg: first_negative.is_none(),
        first_negative,
        suspected_jumps,
        tolerance: AUDIT_TOLERANCE,
    })
}

fn refine_dip(expr: &NonlinearityExpr, lo: f64, hi: f64) -> Result<Option<(f64, f64)>> {
    let pts: Vec<f64> = (0..=REFINE_POINTS)
        .map(|j| lo + (hi - lo) * j as f64 / REFINE_POINTS as f64)
        .collect();
    let vals = pts
        .iter()
        .map(|&s| expr.eval_signed(s))
        .collect::<Result<Vec<_>>>()?;
    Ok((0..REFINE_POINTS)
        .find(|&j| violates(vals[j], vals[j + 1]))
        .map(|j| (pts[j], pts[j + 1])))
}

fn persistent_jump(expr: &NonlinearityExpr, mut a: f64, mut b: f64) -> Result<Option<(f64, f64)>> {
    let mut fa = expr.eval_signed(a)?;
    let mut fb = expr.eval_signed(b)?;
    for _ in 0..JUMP_BISECTIONS {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = expr.eval_signed(m)?;
        if (fm - fa).abs() >= (fb - fm).abs() {
            b = m;
            fb = fm;
        } else {
            a = m;
            fa = fm;
        }
    }
    let scale = fa.abs().max(fb.abs()).max(1.0);
    Ok(((fb - fa).abs() > JUMP_RESIDUAL * scale).then_some((a, b)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::builtin::{builtin_family, Family};

    #[test]
    fn square_passes() {
        let f = NonlinearityExpr::parse("s^2").unwrap();
        let a = monotonicity_audit(&f, 1e6, 500).unwrap();
        assert!(a.is_nondecreasing && a.nonneg && a.passed());
        assert!(a.suspected_jumps.is_empty());
    }

    #[test]
    fn heavy_log_damping_is_rejected_with_a_witness() {
        let f = builtin_family(Family::LogFamily { d: 2.0, beta: 10.0 }).unwrap();
        let a = monotonicity_audit(&f, 1e6, 2000).unwrap();
        assert!(!a.is_nondecreasing);
        let (s1, s2) = a.first_violation.unwrap();
        assert!(s1 < s2);
        let (f1, f2) = (f.eval(s1).unwrap(), f.eval(s2).unwrap());
        assert!(f1 > f2 + AUDIT_TOLERANCE * f1.max(1.0));
        assert!(a.require_passed().is_err());
    }

    #[test]
    fn sign_change_detected() {
        let f = NonlinearityExpr::parse("1 - s").unwrap();
        let a = monotonicity_audit(&f, 10.0, 200).unwrap();
        assert!(!a.nonneg);
        assert!(a.first_negative.unwrap() > 1.0);
    }

    #[test]
    fn domain_error_carries_location() {
        let f = NonlinearityExpr::parse("log(s)").unwrap();
        match monotonicity_audit(&f, 10.0, 50) {
            Err(Error::Domain { s, .. }) => assert_eq!(s, 0.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn step_like_function_flags_a_jump() {
        // Rises by one over a width of 1e-16 around s = 2: a numerical step.
        let step = NonlinearityExpr::parse("1 / (1 + exp(-(s - 2) * 1e16))").unwrap();
        let a = monotonicity_audit(&step, 10.0, 400).unwrap();
        assert!(!a.suspected_jumps.is_empty());
        let smooth = NonlinearityExpr::parse("1 / (1 + exp(-(s - 2)))").unwrap();
        let b = monotonicity_audit(&smooth, 10.0, 400).unwrap();
        assert!(b.suspected_jumps.is_empty());
    }
}
