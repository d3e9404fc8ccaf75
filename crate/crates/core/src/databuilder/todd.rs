use serde::Serialize;

use super::{basel_tail, finish_field, inverse_square_sum, BlowupDataSpec, DataKind, DataTerm, GridChoice, ToddPrediction};
use crate::criteria::{series_search, Outcome};
use crate::error::{Error, Result};
use crate::heatkernel::{kernel_constants, Variant};
use crate::nonlinearity::NonlinearityExpr;
use crate::solver::RadialField;

/// Growth of `k_n`, the last index of the `n`-th window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KSchedule {
    /// `k_n = k0 + step n`.
    Linear { step: usize },
    /// `k_n = k0 + ceil(n^exponent)`.
    Power { exponent: f64 },
}

impl KSchedule {
    pub fn k_n(&self, k0: usize, n: usize) -> usize {
        match *self {
            KSchedule::Linear { step } => k0 + step * n,
            KSchedule::Power { exponent } => k0 + (n as f64).powf(exponent).ceil() as usize,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ToddOptions {
    pub theta: f64,
    /// Terms requested from the series search.
    pub witness_len: usize,
    pub schedule: KSchedule,
    pub variant: Variant,
    pub grid: GridChoice,
}

impl Default for ToddOptions {
    fn default() -> Self {
        Self {
            theta: 2.0,
            witness_len: 256,
            schedule: KSchedule::Linear { step: 1 },
            variant: Variant::Dirichlet,
            grid: GridChoice::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ToddSchedule {
    pub theta: f64,
    pub schedule: KSchedule,
    /// Half the domain radius.
    pub delta0: f64,
    pub n0: usize,
    /// First `k` with `phi_k >= 1`.
    pub k0: usize,
    /// `s_1, s_2, ...` from the series search.
    pub witness: Vec<f64>,
    /// `k_n` and `zeta_n` for `n = n0..=N`.
    pub k_n: Vec<usize>,
    pub zeta: Vec<usize>,
}

impl ToddSchedule {
    fn s(&self, k: usize) -> f64 {
        self.witness[k - 1]
    }
}

pub fn build_todd_data(
    f: &NonlinearityExpr,
    d: usize,
    n: usize,
    domain_radius: f64,
) -> Result<(BlowupDataSpec, RadialField)> {
    build_todd_data_with(f, d, n, domain_radius, &ToddOptions::default())
}

/// `u0 = sum_{n0 <= n <= N} n^-2 alpha_n^d chi_{1/alpha_n}` with
/// `alpha_n = (n^2 phi_{zeta_n})^{1/d}` and `phi_k = s_k / c_d`.
pub fn build_todd_data_with(
    f: &NonlinearityExpr,
    d: usize,
    n: usize,
    domain_radius: f64,
    opts: &ToddOptions,
) -> Result<(BlowupDataSpec, RadialField)> {
    if n == 0 {
        return Err(Error::param("N", "need at least one term"));
    }
    if !(domain_radius > 0.0) || !domain_radius.is_finite() {
        return Err(Error::param("R", "must be positive"));
    }
    let constants = kernel_constants(d, opts.variant)?;
    let witness = series_search(f, d as f64, opts.theta, opts.witness_len)?;
    if witness.verdict.outcome != Outcome::NoLocalExistence {
        return Err(Error::Schedule(format!(
            "series witness does not diverge (verdict {:?})",
            witness.verdict.outcome
        )));
    }
    let s = witness.sequence;
    for (k, w) in s.windows(2).enumerate() {
        if w[1] < opts.theta * w[0] * (1.0 - 1e-12) {
            return Err(Error::Schedule(format!("s_{} / s_{} below theta", k + 2, k + 1)));
        }
    }
    let c_d = constants.c_d;
    let phi = |k: usize| s[k - 1] / c_d;
    let len = s.len();
    let k0 = (1..=len)
        .find(|&k| phi(k) >= 1.0)
        .ok_or_else(|| Error::Schedule("no phi_k reaches 1".into()))?;
    let delta0 = 0.5 * domain_radius;
    let df = d as f64;

    let too_short = |what: usize| Error::Schedule(format!("witness of {len} terms too short for n = {what}"));
    let mut n0 = None;
    let mut rows = Vec::new();
    let mut m = 1;
    while m <= n || n0.is_none() {
        let k_n = opts.schedule.k_n(k0, m);
        if k_n + 1 > len {
            return Err(too_short(m));
        }
        let half = 2.0 * phi(k_n + 1);
        let zeta = (k_n + 1..=len).find(|&z| phi(z) >= half).ok_or_else(|| too_short(m))?;
        let alpha = ((m * m) as f64 * phi(zeta)).powf(1.0 / df);
        if n0.is_none() && 1.0 / alpha < delta0 {
            n0 = Some(m);
        }
        if n0.is_some() && m <= n {
            rows.push((m, k_n, zeta, alpha));
        }
        m += 1;
    }
    let n0 = n0.unwrap_or(1);
    if n < n0 {
        return Err(Error::param("N", format!("must be at least n0 = {n0}")));
    }

    let terms: Vec<DataTerm> = rows
        .iter()
        .map(|&(m, _, zeta, alpha)| DataTerm {
            index: m,
            phi: phi(zeta),
            amplitude: alpha.powf(df) / (m * m) as f64,
            radius: 1.0 / alpha,
        })
        .collect();
    let schedule = ToddSchedule {
        theta: opts.theta,
        schedule: opts.schedule,
        delta0,
        n0,
        k0,
        witness: s.clone(),
        k_n: rows.iter().map(|r| r.1).collect(),
        zeta: rows.iter().map(|r| r.2).collect(),
    };
    for (i, t) in terms.iter().enumerate() {
        let (k_n, zeta) = (schedule.k_n[i], schedule.zeta[i]);
        if !(phi(k_n + 1) <= 0.5 * phi(zeta)) || !(t.radius + delta0 <= domain_radius) {
            return Err(Error::Schedule(format!("re-check failed at n = {}", t.index)));
        }
    }

    let grid = opts.grid.resolve(d, domain_radius, &terms)?;
    let (field, norm_sampled, norm_exact) = finish_field(grid, &terms, d, 1.0)?;
    let mut spec = BlowupDataSpec {
        kind: DataKind::Todd,
        d,
        q: 1.0,
        p: 1.0 + 2.0 / df,
        f: f.clone(),
        n_terms: n,
        domain_radius,
        variant: opts.variant,
        constants,
        epsilon: None,
        todd: Some(schedule),
        terms,
        norm_sampled,
        norm_exact,
        norm_bound: constants.omega_d * inverse_square_sum(n0, n),
        tail_bound: constants.omega_d * basel_tail(n),
        predicted: Vec::new(),
    };
    spec.predicted = predict(&spec)?.into_iter().map(|p| p.value).collect();
    Ok((spec, field))
}

pub(super) fn predict(spec: &BlowupDataSpec) -> Result<Vec<ToddPrediction>> {
    let sched = spec
        .todd
        .as_ref()
        .ok_or_else(|| Error::param("todd", "Todd data without its schedule"))?;
    let p = spec.p;
    spec.terms
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let k_n = sched.k_n[i];
            let mut series_sum = 0.0;
            for k in sched.k0..=k_n {
                let s = sched.s(k);
                series_sum += spec.f.eval(s)? * s.powf(-p);
            }
            let psi = 1.0 / (t.index * t.index) as f64;
            Ok(ToddPrediction {
                n: t.index,
                psi,
                k0: sched.k0,
                k_n,
                zeta: sched.zeta[i],
                series_sum,
                value: psi.powf(p) * series_sum,
            })
        })
        .collect()
}
