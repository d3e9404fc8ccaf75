use super::l1::integral_tail_test_with;
use super::limsup::{check_dimension, classify_lq_with};
use super::{audit, ls_slope, ClassifyOptions, Criterion, Evidence, Outcome, Verdict};
use crate::error::{Error, Result};
use crate::nonlinearity::{geometric_grid, sup_ratio_envelope, EnvelopeOrigin, NonlinearityExpr};

const NEAR_ZERO: (f64, f64) = (1e-8, 1e-2);
/// Upper end of the sub-window used for the near-zero slope.
const NEAR_ZERO_FIT: f64 = 1e-6;

/// Whole-space classification: `f(s)/s` must stay bounded as `s -> 0`, and
/// the behaviour at infinity must pass the `L^q` (`q > 1`) or `L^1` test.
pub fn classify_whole_space(f: &NonlinearityExpr, q: f64, d: f64) -> Result<Verdict> {
    classify_whole_space_with(f, q, d, &ClassifyOptions::default())
}

pub fn classify_whole_space_with(f: &NonlinearityExpr, q: f64, d: f64, opts: &ClassifyOptions) -> Result<Verdict> {
    check_dimension(d)?;
    if !(q >= 1.0) {
        return Err(Error::param("q", "must be at least 1"));
    }
    audit(f, opts)?;

    let grid = geometric_grid(NEAR_ZERO.0, NEAR_ZERO.1, 121);
    let ratios = grid
        .iter()
        .map(|&s| Ok(f.eval(s)? / s))
        .collect::<Result<Vec<f64>>>()?;
    let fit_end = grid.partition_point(|&s| s <= NEAR_ZERO_FIT * (1.0 + 1e-12));
    let (x, y): (Vec<f64>, Vec<f64>) = grid[..fit_end]
        .iter()
        .zip(&ratios[..fit_end])
        .filter(|(_, r)| **r > 0.0)
        .map(|(s, r)| (s.ln(), r.ln()))
        .unzip();
    let slope = if x.len() < 3 {
        0.0
    } else {
        let v = ls_slope(&x, &y);
        if v.abs() < 1e-9 {
            0.0
        } else {
            v
        }
    };

    let mut near = Evidence {
        grid: grid.clone(),
        values: ratios,
        ..Evidence::default()
    };
    near.stat("zero_slope", slope);
    near.stat("q", q);
    near.stat("d", d);

    if slope <= -opts.dead_band {
        near.notes.push("f(s)/s is unbounded as s -> 0".into());
        return Ok(Verdict {
            outcome: Outcome::NoLocalExistence,
            criterion: Criterion::WholeSpaceZero,
            dead_band: opts.dead_band,
            evidence: near,
        });
    }
    if slope < 0.0 {
        near.notes.push("near-zero slope inside the dead-band".into());
        return Ok(Verdict {
            outcome: Outcome::Inconclusive,
            criterion: Criterion::WholeSpaceZero,
            dead_band: opts.dead_band,
            evidence: near,
        });
    }

    let mut verdict = if q > 1.0 {
        classify_lq_with(f, q, d, opts)?
    } else {
        let env = sup_ratio_envelope(f, opts.l1_s_max, EnvelopeOrigin::ZeroPlus)?;
        let mut v = integral_tail_test_with(&env, d, opts.l1_s_max, opts.dead_band)?;
        if let Some(z) = env.zero_limit_estimate {
            v.evidence.stat("zero_limit_estimate", z);
        }
        v
    };
    verdict.evidence.stat("zero_slope", slope);
    verdict
        .evidence
        .notes
        .push("f(s)/s bounded near 0; decided by the behaviour at infinity".into());
    Ok(verdict)
}
