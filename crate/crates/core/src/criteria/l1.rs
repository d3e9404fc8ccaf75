use super::limsup::check_dimension;
use super::{audit, l1_outcome, tail_cascade, ClassifyOptions, Criterion, Evidence, Verdict, MIN_BLOCKS};
use crate::error::{Error, Result};
use crate::nonlinearity::{sup_ratio_envelope, EnvelopeOrigin, NonlinearityExpr, RatioEnvelope};
use crate::quadrature::gauss_legendre;

const GAUSS_POINTS: usize = 4;

/// `ln I_j` for `I_j = int_{2^j}^{2^{j+1}} s^{-p} F(s) ds`, computed as
/// `2^{j(1-p)} int_1^2 u^{-p} F(2^j u) du` so tiny blocks do not underflow.
fn block_logs(env: &RatioEnvelope, p: f64, blocks: usize) -> Result<Vec<f64>> {
    let (x, w) = gauss_legendre(GAUSS_POINTS);
    let mut out = Vec::with_capacity(blocks);
    for j in 0..blocks {
        let scale = 2f64.powi(j as i32);
        let (lo, hi) = (scale, 2.0 * scale);
        let mut cuts = vec![lo];
        let a = env.grid.partition_point(|&s| s <= lo);
        let b = env.grid.partition_point(|&s| s < hi);
        cuts.extend_from_slice(&env.grid[a..b]);
        cuts.push(hi);
        let mut integral = 0.0;
        for seg in cuts.windows(2) {
            let (ua, ub) = (seg[0] / scale, seg[1] / scale);
            let (c, h) = (0.5 * (ua + ub), 0.5 * (ub - ua));
            for (xi, wi) in x.iter().zip(&w) {
                let u = c + h * xi;
                integral += wi * h * u.powf(-p) * env.eval(scale * u)?;
            }
        }
        out.push(integral.ln() + (j as f64) * (1.0 - p) * std::f64::consts::LN_2);
    }
    Ok(out)
}

pub fn integral_tail_test(env: &RatioEnvelope, d: f64, s_max: f64) -> Result<Verdict> {
    integral_tail_test_with(env, d, s_max, super::DEAD_BAND)
}

/// Dyadic block test for `int_1^inf s^{-(1+2/d)} F(s) ds < inf`.
pub fn integral_tail_test_with(env: &RatioEnvelope, d: f64, s_max: f64, dead_band: f64) -> Result<Verdict> {
    check_dimension(d)?;
    let top = s_max.min(env.s_max());
    let blocks = if top > 2.0 { (top.log2() + 1e-9).floor() as usize } else { 0 };
    if blocks < MIN_BLOCKS {
        return Err(Error::EnvelopeTooShort {
            blocks,
            required: MIN_BLOCKS,
        });
    }
    let p = 1.0 + 2.0 / d;
    let ln_i = block_logs(env, p, blocks)?;
    let mut ev = Evidence {
        grid: (0..blocks).map(|j| 2f64.powi(j as i32)).collect(),
        values: ln_i.iter().map(|v| v.exp()).collect(),
        ..Evidence::default()
    };
    ev.stat("p", p);
    ev.stat("d", d);
    ev.stat("blocks", blocks as f64);
    ev.stat("s_max", top);
    let tail = tail_cascade(1, &ln_i[1..], dead_band, &mut ev);
    Ok(Verdict {
        outcome: l1_outcome(tail),
        criterion: Criterion::L1Integral,
        dead_band,
        evidence: ev,
    })
}

pub fn classify_l1(f: &NonlinearityExpr, d: f64) -> Result<Verdict> {
    classify_l1_with(f, d, &ClassifyOptions::default())
}

pub fn classify_l1_with(f: &NonlinearityExpr, d: f64, opts: &ClassifyOptions) -> Result<Verdict> {
    check_dimension(d)?;
    audit(f, opts)?;
    let env = sup_ratio_envelope(f, opts.l1_s_max, EnvelopeOrigin::One)?;
    integral_tail_test_with(&env, d, opts.l1_s_max, opts.dead_band)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criteria::Outcome;
    use crate::nonlinearity::{builtin_family, Family};

    fn verdict(text: &str, d: f64) -> Verdict {
        classify_l1(&NonlinearityExpr::parse(text).unwrap(), d).unwrap()
    }

    #[test]
    fn critical_power_blocks_are_log_two() {
        let v = verdict("s^2", 2.0);
        assert_eq!(v.outcome, Outcome::NoLocalExistence);
        for i in &v.evidence.values[1..] {
            assert!((i - std::f64::consts::LN_2).abs() < 1e-9, "{i}");
        }
    }

    #[test]
    fn linear_converges() {
        assert_eq!(verdict("s", 2.0).outcome, Outcome::Exists);
        assert_eq!(verdict("s^3", 1.0).outcome, Outcome::NoLocalExistence);
    }

    #[test]
    fn log_family_boundary() {
        for (beta, expect) in [(1.0, Outcome::NoLocalExistence), (1.5, Outcome::Exists)] {
            let f = builtin_family(Family::LogFamily { d: 2.0, beta }).unwrap();
            assert_eq!(classify_l1(&f, 2.0).unwrap().outcome, expect, "beta = {beta}");
        }
        let f = builtin_family(Family::LogFamily { d: 1.0, beta: 1.0 }).unwrap();
        assert_eq!(classify_l1(&f, 1.0).unwrap().outcome, Outcome::NoLocalExistence);
    }

    #[test]
    fn short_envelope_rejected() {
        let f = NonlinearityExpr::parse("s").unwrap();
        let env = sup_ratio_envelope(&f, 100.0, EnvelopeOrigin::One).unwrap();
        assert!(matches!(
            integral_tail_test(&env, 2.0, 100.0),
            Err(Error::EnvelopeTooShort { blocks: 6, .. })
        ));
    }
}
