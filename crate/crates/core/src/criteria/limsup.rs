use serde::Serialize;

use super::{audit, ls_slope, ClassifyOptions, Criterion, Evidence, Outcome, Verdict};
use crate::error::{Error, Result};
use crate::nonlinearity::{geometric_grid, NonlinearityExpr};

/// Slopes smaller than this are round-off from exact cancellation.
const SLOPE_SNAP: f64 = 1e-9;
/// Relative decade-over-decade growth of the tail maximum still read as bounded.
const BOUNDED_GROWTH: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct LimsupEstimate {
    pub exponent: f64,
    /// `(s, s^-exponent f(s))`.
    pub samples: Vec<(f64, f64)>,
    /// `running_max_tail[i] = max_{j >= i} g(s_j)`.
    pub running_max_tail: Vec<f64>,
    /// Log-log slope of `g` over the last two decades.
    pub trend: f64,
    /// `max g` over the last decade divided by `max g` over the one before, minus 1.
    pub decade_growth: f64,
    pub overflow: bool,
}

pub fn limsup_estimate(f: &NonlinearityExpr, gamma: f64, s_max: f64) -> Result<LimsupEstimate> {
    estimate(f, gamma, s_max, ClassifyOptions::default().lq_per_decade)
}

fn estimate(f: &NonlinearityExpr, gamma: f64, s_max: f64, per_decade: usize) -> Result<LimsupEstimate> {
    if !(gamma > 0.0) {
        return Err(Error::param("gamma", "must be positive"));
    }
    if !(s_max >= 1e6) || !s_max.is_finite() {
        return Err(Error::param("s_max", "must be at least 1e6"));
    }
    let decades = s_max.log10();
    let n = (decades * per_decade as f64).round() as usize + 1;
    let grid = geometric_grid(1.0, s_max, n);
    let mut ln_g = Vec::with_capacity(n);
    let mut samples = Vec::with_capacity(n);
    for &s in &grid {
        let v = f.eval(s)?;
        let lg = v.ln() - gamma * s.ln();
        ln_g.push(lg);
        samples.push((s, lg.exp()));
    }
    let overflow = ln_g.iter().any(|v| *v == f64::INFINITY);

    let mut running_max_tail = vec![0.0; n];
    let mut m = f64::NEG_INFINITY;
    for i in (0..n).rev() {
        m = m.max(samples[i].1);
        running_max_tail[i] = m;
    }

    let tail_start = grid.partition_point(|&s| s < s_max / 100.0);
    let trend = if overflow {
        f64::INFINITY
    } else {
        let (x, y): (Vec<f64>, Vec<f64>) = grid[tail_start..]
            .iter()
            .zip(&ln_g[tail_start..])
            .filter(|(_, v)| v.is_finite())
            .map(|(s, v)| (s.ln(), *v))
            .unzip();
        if x.len() < 3 {
            f64::NEG_INFINITY
        } else {
            let slope = ls_slope(&x, &y);
            if slope.abs() < SLOPE_SNAP {
                0.0
            } else {
                slope
            }
        }
    };

    let last = grid.partition_point(|&s| s < s_max / 10.0);
    let max_of = |a: usize, b: usize| samples[a..b].iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let recent = max_of(last, n);
    let previous = max_of(tail_start, last + 1);
    let decade_growth = if recent == previous {
        0.0
    } else if previous > 0.0 {
        recent / previous - 1.0
    } else if recent > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };

    Ok(LimsupEstimate {
        exponent: gamma,
        samples,
        running_max_tail,
        trend,
        decade_growth,
        overflow,
    })
}

/// The `L^q` decision rule on the tail statistics.
///
/// `Exists` needs `slope <= -dead_band`, or a non-positive slope together with
/// a tail maximum that no longer grows. `NoLocalExistence` needs
/// `slope >= dead_band` and a growing tail maximum. The two regions are at
/// least `dead_band` apart in `slope`.
pub fn lq_outcome(slope: f64, decade_growth: f64, dead_band: f64) -> Outcome {
    if slope >= dead_band && decade_growth > 0.0 {
        Outcome::NoLocalExistence
    } else if slope <= -dead_band || (slope <= 0.0 && decade_growth <= BOUNDED_GROWTH) {
        Outcome::Exists
    } else {
        Outcome::Inconclusive
    }
}

pub fn classify_lq(f: &NonlinearityExpr, q: f64, d: f64) -> Result<Verdict> {
    classify_lq_with(f, q, d, &ClassifyOptions::default())
}

pub fn classify_lq_with(f: &NonlinearityExpr, q: f64, d: f64, opts: &ClassifyOptions) -> Result<Verdict> {
    if !(q > 1.0) {
        return Err(Error::param("q", "the limsup criterion needs q > 1"));
    }
    check_dimension(d)?;
    audit(f, opts)?;
    let gamma = 1.0 + 2.0 * q / d;
    let est = estimate(f, gamma, opts.lq_s_max, opts.lq_per_decade)?;
    let outcome = lq_outcome(est.trend, est.decade_growth, opts.dead_band);

    let mut ev = Evidence {
        grid: est.samples.iter().map(|p| p.0).collect(),
        values: est.samples.iter().map(|p| p.1).collect(),
        ..Evidence::default()
    };
    ev.stat("exponent", gamma);
    ev.stat("q", q);
    ev.stat("d", d);
    ev.stat("slope", est.trend);
    ev.stat("decade_growth", est.decade_growth);
    ev.stat("tail_max", *est.running_max_tail.last().unwrap_or(&f64::NAN));
    if est.overflow {
        ev.notes.push("f overflowed on the grid, read as divergence".into());
    }
    Ok(Verdict {
        outcome,
        criterion: Criterion::LqLimsup,
        dead_band: opts.dead_band,
        evidence: ev,
    })
}

pub(crate) fn check_dimension(d: f64) -> Result<()> {
    if !(d >= 1.0) || !d.is_finite() {
        return Err(Error::param("d", "dimension must be at least 1"));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalExponentReport {
    pub gamma_star: f64,
    pub q_star: f64,
    /// Interval `[lo, hi]` around `gamma_star`: below `lo` the limsup is
    /// detected as infinite, above `hi` as finite.
    pub bracket: (f64, f64),
    pub q_bracket: (f64, f64),
    /// No sign change of the trend on `[1, gamma_hi]`.
    pub degenerate: bool,
    pub d: f64,
    pub dead_band: f64,
}

pub fn critical_exponent_report(f: &NonlinearityExpr, d: f64) -> Result<CriticalExponentReport> {
    critical_exponent_report_with(f, d, &ClassifyOptions::default())
}

pub fn critical_exponent_report_with(
    f: &NonlinearityExpr,
    d: f64,
    opts: &ClassifyOptions,
) -> Result<CriticalExponentReport> {
    check_dimension(d)?;
    audit(f, opts)?;
    let trend = |g: f64| -> Result<f64> { Ok(estimate(f, g, opts.lq_s_max, opts.lq_per_decade)?.trend) };
    let db = opts.dead_band;
    let lo_trend = trend(1.0)?;
    let hi_trend = trend(opts.gamma_hi)?;

    let (gamma_star, degenerate) = if lo_trend <= 0.0 {
        // The trend is linear in gamma with slope -1, so its value at 1 fixes
        // the crossing below 1; f bounded puts it at 0.
        ((1.0 + lo_trend).max(0.0), true)
    } else if hi_trend > 0.0 {
        (opts.gamma_hi, true)
    } else {
        let (mut a, mut b) = (1.0, opts.gamma_hi);
        for _ in 0..60 {
            let m = 0.5 * (a + b);
            if trend(m)? > 0.0 {
                a = m;
            } else {
                b = m;
            }
        }
        (0.5 * (a + b), false)
    };
    let bracket = if degenerate && hi_trend > 0.0 {
        (opts.gamma_hi, f64::INFINITY)
    } else {
        (gamma_star - db, gamma_star + db)
    };
    let to_q = |g: f64| d * (g - 1.0) / 2.0;
    Ok(CriticalExponentReport {
        gamma_star,
        q_star: to_q(gamma_star),
        bracket,
        q_bracket: (to_q(bracket.0), to_q(bracket.1)),
        degenerate,
        d,
        dead_band: db,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn expr(t: &str) -> NonlinearityExpr {
        NonlinearityExpr::parse(t).unwrap()
    }

    #[test]
    fn exact_cancellation() {
        let e = limsup_estimate(&expr("s^3"), 3.0, 1e8).unwrap();
        assert_eq!(e.trend, 0.0);
        assert!(e.samples.iter().all(|p| (p.1 - 1.0).abs() < 1e-12));
        let e = limsup_estimate(&expr("s^3"), 2.0, 1e8).unwrap();
        assert!((e.trend - 1.0).abs() < 1e-9);
    }

    #[test]
    fn log_damped_critical_power_has_zero_limsup() {
        let e = limsup_estimate(&expr("s^2/log(e+s)"), 2.0, 1e15).unwrap();
        assert!(e.trend < 0.0 && e.trend > -0.05);
        assert!(e.running_max_tail.last().unwrap() < &0.03);
        assert!(e.running_max_tail.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn overflow_reads_as_divergence() {
        let e = limsup_estimate(&expr("exp(s)"), 3.0, 1e6).unwrap();
        assert!(e.overflow);
        assert_eq!(e.trend, f64::INFINITY);
    }

    #[test]
    fn lq_examples() {
        assert_eq!(classify_lq(&expr("s^3"), 2.0, 2.0).unwrap().outcome, Outcome::Exists);
        assert_eq!(classify_lq(&expr("s^4"), 2.0, 2.0).unwrap().outcome, Outcome::NoLocalExistence);
        assert_eq!(classify_lq(&expr("s^3 + s"), 2.0, 2.0).unwrap().outcome, Outcome::Exists);
        assert!(classify_lq(&expr("s^3"), 1.0, 2.0).is_err());
    }

    #[test]
    fn refuses_non_monotone() {
        let err = classify_lq(&expr("s^2/log(e+s)^10"), 2.0, 2.0).unwrap_err();
        assert!(matches!(err, Error::AuditFailed(_)));
    }

    #[test]
    fn critical_exponents() {
        let r = critical_exponent_report(&expr("s^3"), 2.0).unwrap();
        assert!((r.gamma_star - 3.0).abs() < 1e-8);
        assert!((r.q_star - 2.0).abs() < 1e-8);
        let r = critical_exponent_report(&expr("s^3 + s^5"), 1.0).unwrap();
        assert!((r.gamma_star - 5.0).abs() < 1e-6);
        let r = critical_exponent_report(&expr("s^2/log(e+s)"), 2.0).unwrap();
        assert!((r.gamma_star - 2.0).abs() <= 0.05, "{}", r.gamma_star);
        assert!(r.bracket.0 <= 2.0 && 2.0 <= r.bracket.1);
        let r = critical_exponent_report(&expr("1 - exp(-s)"), 2.0).unwrap();
        assert!(r.degenerate);
        assert!(r.gamma_star.abs() < 1e-6);
    }
}
