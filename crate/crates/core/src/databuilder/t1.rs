use super::{basel_tail, finish_field, inverse_square_sum, BlowupDataSpec, DataKind, DataTerm, GridChoice, T1Prediction};
use crate::error::{Error, Result};
use crate::heatkernel::{kernel_constants, Variant};
use crate::nonlinearity::NonlinearityExpr;
use crate::solver::RadialField;

const SEARCH_RATIO: f64 = 1.1;
const SEARCH_CAP: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct T1Options {
    pub variant: Variant,
    pub grid: GridChoice,
}

impl Default for T1Options {
    fn default() -> Self {
        Self {
            variant: Variant::Dirichlet,
            grid: GridChoice::default(),
        }
    }
}

/// `ln f(phi) >= p ln phi + k / q`, with an overflowing `f` counted as a miss.
fn schedule_holds(f: &NonlinearityExpr, phi: f64, p: f64, k: usize, q: f64) -> Result<bool> {
    let v = f.eval(phi)?;
    Ok(v.is_finite() && v > 0.0 && v.ln() >= p * phi.ln() + k as f64 / q)
}

fn search_phi(f: &NonlinearityExpr, p: f64, k: usize, q: f64, previous: f64) -> Result<f64> {
    let mut phi = (k as f64).max(previous + 1.0);
    while phi <= SEARCH_CAP {
        if schedule_holds(f, phi, p, k, q)? {
            return Ok(phi);
        }
        phi *= SEARCH_RATIO;
    }
    Err(Error::Schedule(format!(
        "no phi_{k} <= {SEARCH_CAP:e} with f(phi) >= phi^{p} e^({k}/{q})"
    )))
}

pub fn build_t1_data(
    f: &NonlinearityExpr,
    d: usize,
    q: f64,
    n: usize,
    epsilon: f64,
    domain_radius: f64,
) -> Result<(BlowupDataSpec, RadialField)> {
    build_t1_data_with(f, d, q, n, epsilon, domain_radius, &T1Options::default())
}

/// `u0 = sum_{k <= N} beta_d^-1 phi_k chi_{r_k}` with
/// `r_k = eps phi_k^{-q/d} k^{-2q/d}`.
pub fn build_t1_data_with(
    f: &NonlinearityExpr,
    d: usize,
    q: f64,
    n: usize,
    epsilon: f64,
    domain_radius: f64,
    opts: &T1Options,
) -> Result<(BlowupDataSpec, RadialField)> {
    if !(q >= 1.0) || !q.is_finite() {
        return Err(Error::param("q", "must be finite and at least 1"));
    }
    if n == 0 {
        return Err(Error::param("N", "need at least one term"));
    }
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::param("epsilon", "must be positive"));
    }
    if !(domain_radius > 0.0) || !domain_radius.is_finite() {
        return Err(Error::param("R", "must be positive"));
    }
    let constants = kernel_constants(d, opts.variant)?;
    let df = d as f64;
    let p = 1.0 + 2.0 * q / df;

    let mut terms = Vec::with_capacity(n);
    let mut previous = 0.0;
    for k in 1..=n {
        let phi = search_phi(f, p, k, q, previous)?;
        previous = phi;
        terms.push(DataTerm {
            index: k,
            phi,
            amplitude: phi / constants.beta_d,
            radius: epsilon * phi.powf(-q / df) * (k as f64).powf(-2.0 * q / df),
        });
    }
    // The argument needs B_{2 r_k} inside the domain.
    if 2.0 * terms[0].radius > domain_radius {
        return Err(Error::param(
            "epsilon",
            format!("2 r_1 = {:.4e} exceeds R = {domain_radius}", 2.0 * terms[0].radius),
        ));
    }
    for t in &terms {
        if !schedule_holds(f, t.phi, p, t.index, q)? {
            return Err(Error::Schedule(format!("re-check failed at k = {}", t.index)));
        }
    }

    let grid = opts.grid.resolve(d, domain_radius, &terms)?;
    let (field, norm_sampled, norm_exact) = finish_field(grid, &terms, d, q)?;
    let unit = constants.omega_d.powf(1.0 / q) * epsilon.powf(df / q) / constants.beta_d;
    let mut spec = BlowupDataSpec {
        kind: DataKind::T1,
        d,
        q,
        p,
        f: f.clone(),
        n_terms: n,
        domain_radius,
        variant: opts.variant,
        constants,
        epsilon: Some(epsilon),
        todd: None,
        terms,
        norm_sampled,
        norm_exact,
        norm_bound: unit * inverse_square_sum(1, n),
        tail_bound: unit * basel_tail(n),
        predicted: Vec::new(),
    };
    spec.predicted = predict(&spec)?.into_iter().map(|p| p.value).collect();
    Ok((spec, field))
}

pub(super) fn predict(spec: &BlowupDataSpec) -> Result<Vec<T1Prediction>> {
    let eps = spec
        .epsilon
        .ok_or_else(|| Error::param("epsilon", "T1 data without epsilon"))?;
    let (d, q) = (spec.d as f64, spec.q);
    let beta = spec.constants.beta_d;
    let omega = spec.constants.omega_d;
    let c = beta.powf(q) * omega * eps.powf(d + 2.0 * q);
    spec.terms
        .iter()
        .map(|t| {
            let t_k = t.radius * t.radius;
            let pointwise = beta * t_k * spec.f.eval(t.phi)?;
            let k = t.index as f64;
            Ok(T1Prediction {
                k: t.index,
                t_lo: 0.5 * t_k,
                t_hi: t_k,
                pointwise,
                lq_power: omega * t.radius.powf(d) * pointwise.powf(q),
                value: c * k.powf(-2.0 * q * (d + 2.0 * q) / d) * k.exp(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn expr(text: &str) -> NonlinearityExpr {
        NonlinearityExpr::parse(text).unwrap()
    }

    #[test]
    fn single_term_norm() {
        let (spec, field) = build_t1_data(&expr("s^4"), 1, 1.0, 1, 0.2, 1.0).unwrap();
        let k = spec.constants;
        let expected = k.omega_d * 0.2 / k.beta_d;
        assert!((spec.norm_sampled - expected).abs() < 1e-12 * expected);
        assert!((spec.norm_bound - expected).abs() < 1e-12 * expected);
        assert_eq!(field.values.len(), field.grid.len());
    }

    #[test]
    fn schedule_and_predictions_agree() {
        let (spec, _) = build_t1_data(&expr("s^4"), 1, 1.0, 5, 0.2, 1.0).unwrap();
        let preds = predict(&spec).unwrap();
        for (t, pr) in spec.terms.iter().zip(&preds) {
            assert!(t.phi >= t.index as f64);
            assert!(pr.value <= pr.lq_power * (1.0 + 1e-12));
        }
        assert!(spec.terms.windows(2).all(|w| w[1].radius < w[0].radius));
    }

    #[test]
    fn subcritical_search_fails() {
        let err = build_t1_data(&expr("s^2"), 1, 1.0, 3, 0.2, 1.0).unwrap_err();
        assert!(matches!(err, Error::Schedule(_)));
    }

    #[test]
    fn wide_epsilon_rejected() {
        assert!(build_t1_data(&expr("s^4"), 1, 1.0, 2, 10.0, 1.0).is_err());
    }
}
