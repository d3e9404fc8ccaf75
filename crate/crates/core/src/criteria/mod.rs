//! Existence / non-existence classification of a nonlinearity.
//!
//! Every decision is a trend statistic compared against a threshold with an
//! explicit dead-band. Inside the band the answer is `Inconclusive`.

mod equivalence;
mod l1;
mod limsup;
mod whole_space;

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::nonlinearity::{monotonicity_audit, NonlinearityExpr, DEFAULT_AUDIT_SAMPLES};

pub use equivalence::{
    equivalence_check, equivalence_check_with, random_equivalence_suite, series_search,
    series_search_with, EquivalenceReport, SeriesWitness, SuiteCase, SuiteReport,
};
pub use l1::{classify_l1, classify_l1_with, integral_tail_test, integral_tail_test_with};
pub use limsup::{
    classify_lq, classify_lq_with, critical_exponent_report, critical_exponent_report_with,
    limsup_estimate, lq_outcome, CriticalExponentReport, LimsupEstimate,
};
pub use whole_space::{classify_whole_space, classify_whole_space_with};

/// Default slope / ratio dead-band.
pub const DEAD_BAND: f64 = 0.05;
/// Fewest dyadic blocks the integral test accepts.
pub const MIN_BLOCKS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Outcome {
    Exists,
    NoLocalExistence,
    Inconclusive,
}

impl Outcome {
    pub fn is_decided(self) -> bool {
        self != Outcome::Inconclusive
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Criterion {
    LqLimsup,
    L1Integral,
    L1Series,
    WholeSpaceZero,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Evidence {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub statistics: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl Evidence {
    pub(crate) fn stat(&mut self, key: &str, value: f64) {
        self.statistics.insert(key.to_string(), value);
    }

    /// Writes `index,x,value` rows for plotting.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(["index", "x", "value"])?;
            for (i, (x, v)) in self.grid.iter().zip(&self.values).enumerate() {
                w.write_record([i.to_string(), x.to_string(), v.to_string()])?;
            }
            w.flush()?;
        }
        crate::report::write_atomic(path, &buf)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub outcome: Outcome,
    pub criterion: Criterion,
    pub dead_band: f64,
    pub evidence: Evidence,
}

/// Knobs shared by the classifiers.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ClassifyOptions {
    pub dead_band: f64,
    /// Upper end of the limsup sampling grid.
    pub lq_s_max: f64,
    /// Samples per decade for the limsup grid.
    pub lq_per_decade: usize,
    /// Upper end of the envelope / series grid for the `L^1` tests.
    pub l1_s_max: f64,
    /// Range and resolution of the monotonicity audit run before classifying.
    pub audit_s_max: f64,
    pub audit_samples: usize,
    pub theta: f64,
    /// Window stride for the series search.
    pub window: usize,
    pub gamma_hi: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            dead_band: DEAD_BAND,
            lq_s_max: 1e15,
            lq_per_decade: 20,
            l1_s_max: 1e100,
            audit_s_max: 1e12,
            audit_samples: DEFAULT_AUDIT_SAMPLES,
            theta: 2.0,
            window: 1,
            gamma_hi: 12.0,
        }
    }
}

pub(crate) fn audit(f: &NonlinearityExpr, opts: &ClassifyOptions) -> Result<()> {
    monotonicity_audit(f, opts.audit_s_max, opts.audit_samples)?.require_passed()
}

/// Least-squares slope of `y` against `x`.
pub(crate) fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    sxy / sxx
}

/// Fate of a non-negative series judged from its tail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Tail {
    Converges,
    Diverges,
    Undecided,
}

/// Decides convergence of `sum_j exp(ln_terms[j])` from the second half of
/// the terms. Indices are `j0, j0 + 1, ...` with `j0 >= 1`.
///
/// Three statistics are tried in turn, each with its own dead-band around
/// the threshold: the geometric ratio, the power-law exponent in `j`, and
/// (only when that exponent is indistinguishable from 1) the exponent of
/// `ln j` in `j * term_j`.
pub(crate) fn tail_cascade(j0: usize, ln_terms: &[f64], db: f64, ev: &mut Evidence) -> Tail {
    if ln_terms.iter().any(|v| *v == f64::INFINITY || v.is_nan()) {
        ev.notes.push("overflow in the series terms, read as divergence".into());
        ev.stat("overflow", 1.0);
        return Tail::Diverges;
    }
    let n = ln_terms.len();
    let start = n / 2;
    let tail = &ln_terms[start..];
    if tail.iter().all(|v| *v == f64::NEG_INFINITY) {
        ev.notes.push("tail terms vanish identically".into());
        return Tail::Converges;
    }
    if tail.iter().any(|v| *v == f64::NEG_INFINITY) {
        ev.notes.push("tail mixes zero and positive terms".into());
        return Tail::Undecided;
    }
    let j: Vec<f64> = (start..n).map(|i| (j0 + i) as f64).collect();

    let rho = ls_slope(&j, tail).exp();
    ev.stat("geometric_ratio", rho);
    if rho <= 1.0 - db {
        return Tail::Converges;
    }
    if rho >= 1.0 + db {
        return Tail::Diverges;
    }

    let ln_j: Vec<f64> = j.iter().map(|v| v.ln()).collect();
    let beta = -ls_slope(&ln_j, tail);
    ev.stat("power_exponent", beta);
    if beta >= 1.0 + db {
        return Tail::Converges;
    }
    if beta <= 1.0 - db {
        return Tail::Diverges;
    }
    if (beta - 1.0).abs() > db / 5.0 {
        ev.notes.push("power exponent inside the dead-band but not at 1".into());
        return Tail::Undecided;
    }

    let ln_ln_j: Vec<f64> = ln_j.iter().map(|v| v.ln()).collect();
    let scaled: Vec<f64> = tail.iter().zip(&ln_j).map(|(t, l)| t + l).collect();
    let gamma = -ls_slope(&ln_ln_j, &scaled);
    ev.stat("log_exponent", gamma);
    if gamma >= 1.0 + db {
        Tail::Converges
    } else if gamma <= 1.0 - db {
        Tail::Diverges
    } else {
        Tail::Undecided
    }
}

pub(crate) fn l1_outcome(tail: Tail) -> Outcome {
    match tail {
        Tail::Converges => Outcome::Exists,
        Tail::Diverges => Outcome::NoLocalExistence,
        Tail::Undecided => Outcome::Inconclusive,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(ln_terms: &[f64]) -> Tail {
        tail_cascade(1, ln_terms, DEAD_BAND, &mut Evidence::default())
    }

    #[test]
    fn cascade_stages() {
        let j = |k: usize| (k + 1) as f64;
        let geometric: Vec<f64> = (0..300).map(|k| -0.5 * j(k)).collect();
        assert_eq!(run(&geometric), Tail::Converges);
        let growing: Vec<f64> = (0..300).map(|k| 0.2 * j(k)).collect();
        assert_eq!(run(&growing), Tail::Diverges);
        let harmonic: Vec<f64> = (0..300).map(|k| -j(k).ln()).collect();
        assert_eq!(run(&harmonic), Tail::Diverges);
        let squares: Vec<f64> = (0..300).map(|k| -2.0 * j(k).ln()).collect();
        assert_eq!(run(&squares), Tail::Converges);
        let constant = vec![0.0; 300];
        assert_eq!(run(&constant), Tail::Diverges);
        let j_log_sq: Vec<f64> = (2..300).map(|k| -j(k).ln() - 2.0 * j(k).ln().ln()).collect();
        assert_eq!(
            tail_cascade(3, &j_log_sq, DEAD_BAND, &mut Evidence::default()),
            Tail::Converges
        );
        let off_by_three_percent: Vec<f64> = (0..300).map(|k| -1.03 * j(k).ln()).collect();
        assert_eq!(run(&off_by_three_percent), Tail::Undecided);
    }

    #[test]
    fn cascade_edge_cases() {
        assert_eq!(run(&[f64::NEG_INFINITY; 20]), Tail::Converges);
        let mut with_inf = vec![0.0; 20];
        with_inf[3] = f64::INFINITY;
        assert_eq!(run(&with_inf), Tail::Diverges);
    }

    #[test]
    fn slope_of_a_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [3.0, 5.0, 7.0, 9.0];
        assert!((ls_slope(&x, &y) - 2.0).abs() < 1e-14);
    }
}
