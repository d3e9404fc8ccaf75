use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::l1::classify_l1_with;
use super::limsup::check_dimension;
use super::{audit, l1_outcome, tail_cascade, ClassifyOptions, Criterion, Evidence, Outcome, Verdict};
use crate::error::{Error, Result};
use crate::nonlinearity::NonlinearityExpr;
use crate::par::{self, Mode};

#[derive(Debug, Clone, Serialize)]
pub struct SeriesWitness {
    pub theta: f64,
    pub p: f64,
    pub window: usize,
    pub sequence: Vec<f64>,
    /// `s_k^-p f(s_k)`.
    pub terms: Vec<f64>,
    pub partial_sums: Vec<f64>,
    pub verdict: Verdict,
}

pub fn series_search(f: &NonlinearityExpr, d: f64, theta: f64, k: usize) -> Result<SeriesWitness> {
    series_search_with(f, d, theta, k, &ClassifyOptions::default())
}

/// Picks, in each window `[theta^{mk}, theta^{m(k+1)})` of the grid
/// `{theta^j}`, the point maximising `s^-p f(s)`, and judges the series of
/// those terms.
pub fn series_search_with(
    f: &NonlinearityExpr,
    d: f64,
    theta: f64,
    k: usize,
    opts: &ClassifyOptions,
) -> Result<SeriesWitness> {
    check_dimension(d)?;
    if !(theta > 1.0) || !theta.is_finite() {
        return Err(Error::param("theta", "must exceed 1"));
    }
    if k < 16 {
        return Err(Error::param("K", "need at least 16 terms"));
    }
    let m = opts.window.max(1);
    let p = 1.0 + 2.0 / d;

    let mut s = 1.0;
    let mut sequence = Vec::with_capacity(k);
    let mut ln_terms = Vec::with_capacity(k);
    for _ in 0..k {
        let mut best = (f64::NAN, f64::NEG_INFINITY);
        for _ in 0..m {
            let lt = f.eval(s)?.ln() - p * s.ln();
            if best.0.is_nan() || lt > best.1 {
                best = (s, lt);
            }
            s *= theta;
        }
        sequence.push(best.0);
        ln_terms.push(best.1);
    }
    let terms: Vec<f64> = ln_terms.iter().map(|v| v.exp()).collect();
    let mut acc = 0.0;
    let partial_sums = terms
        .iter()
        .map(|t| {
            acc += t;
            acc
        })
        .collect();

    let mut ev = Evidence {
        grid: sequence.clone(),
        values: terms.clone(),
        ..Evidence::default()
    };
    ev.stat("p", p);
    ev.stat("theta", theta);
    ev.stat("window", m as f64);
    let tail = tail_cascade(1, &ln_terms, opts.dead_band, &mut ev);
    Ok(SeriesWitness {
        theta,
        p,
        window: m,
        sequence,
        terms,
        partial_sums,
        verdict: Verdict {
            outcome: l1_outcome(tail),
            criterion: Criterion::L1Series,
            dead_band: opts.dead_band,
            evidence: ev,
        },
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceReport {
    /// `None` when either side is inconclusive.
    pub agree: Option<bool>,
    pub series: Verdict,
    pub integral: Verdict,
}

pub fn equivalence_check(f: &NonlinearityExpr, d: f64) -> Result<EquivalenceReport> {
    equivalence_check_with(f, d, &ClassifyOptions::default())
}

pub fn equivalence_check_with(f: &NonlinearityExpr, d: f64, opts: &ClassifyOptions) -> Result<EquivalenceReport> {
    audit(f, opts)?;
    let k = (opts.l1_s_max.ln() / opts.theta.ln()).floor() as usize / opts.window.max(1);
    let series = series_search_with(f, d, opts.theta, k, opts)?.verdict;
    let integral = classify_l1_with(f, d, opts)?;
    let agree = (series.outcome.is_decided() && integral.outcome.is_decided())
        .then(|| series.outcome == integral.outcome);
    Ok(EquivalenceReport {
        agree,
        series,
        integral,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteCase {
    pub d: f64,
    pub a: f64,
    pub b: f64,
    pub f: String,
    pub series: Outcome,
    pub integral: Outcome,
    pub agree: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub count: usize,
    pub decided: usize,
    pub agreed: usize,
    pub cases: Vec<SuiteCase>,
}

impl SuiteReport {
    pub fn all_decided_agree(&self) -> bool {
        self.decided == self.agreed
    }
}

/// `count` functions `s^a log(e+s)^b` with `d` in `{1, 2, 3}`,
/// `a` in `[p-1, p+1]` (at least 0.5) and `b` in `[-a, 3]`, all monotone.
pub fn random_equivalence_suite(seed: u64, count: usize, mode: Mode) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut specs = Vec::with_capacity(count);
    for _ in 0..count {
        let d = rng.random_range(1..=3) as f64;
        let p = 1.0 + 2.0 / d;
        let a: f64 = rng.random_range((p - 1.0).max(0.5)..=p + 1.0);
        let b: f64 = rng.random_range(-a..=3.0);
        let (a, b) = ((a * 1e4).round() / 1e4, (b * 1e4).round() / 1e4);
        specs.push((d, a, b));
    }
    let opts = ClassifyOptions::default();
    let cases = par::map_with(mode, &specs, |&(d, a, b)| -> Result<SuiteCase> {
        let text = format!("s^{a}*log(e+s)^{b}");
        let f = NonlinearityExpr::parse(&text)?;
        let r = equivalence_check_with(&f, d, &opts)?;
        Ok(SuiteCase {
            d,
            a,
            b,
            f: text,
            series: r.series.outcome,
            integral: r.integral.outcome,
            agree: r.agree,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let decided = cases.iter().filter(|c| c.agree.is_some()).count();
    let agreed = cases.iter().filter(|c| c.agree == Some(true)).count();
    Ok(SuiteReport {
        seed,
        count,
        decided,
        agreed,
        cases,
    })
}
