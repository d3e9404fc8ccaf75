use serde::Serialize;

use crate::criteria::ls_slope;
use crate::error::{Error, Result};
use crate::nonlinearity::{
    monotonicity_audit, sup_ratio_envelope, EnvelopeOrigin, NonlinearityExpr, RatioEnvelope, DEFAULT_AUDIT_SAMPLES,
};
use crate::quadrature::gauss_legendre;

const GAUSS_POINTS: usize = 4;
/// Blocks used to extrapolate the tail beyond the envelope.
const TAIL_FIT: usize = 16;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct HorizonOptions {
    /// Returned with `capped = true` when the condition holds for every `T`.
    pub t_max: f64,
    pub s_max: f64,
}

impl Default for HorizonOptions {
    fn default() -> Self {
        Self {
            t_max: 1e6,
            s_max: 1e100,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HorizonReport {
    pub horizon: f64,
    /// `Phi(T)`, to be compared with `bound`.
    pub integral: f64,
    pub bound: f64,
    pub capped: bool,
    pub d: usize,
    pub a_factor: f64,
    pub u0_l1: f64,
    /// `(4 pi)^{-d/2}` in `|S(t) u0|_inf <= c t^{-d/2} |u0|_1`.
    pub smoothing_constant: f64,
    /// Estimated part of `int_2^inf F(m) m^{-1-2/d} dm` beyond the envelope.
    pub tail_estimate: f64,
}

/// `Phi(T) = int_0^T F(max(a s^{-d/2}, 2)) ds` with `a = 2 A c |u0|_1`.
///
/// If `v = A S(t) u0 + chi` then `f(v(s)) <= F(max(a s^{-d/2}, 2)) v(s)`,
/// so `Phi(T) <= (A - 1) / A` makes `v` a supersolution on `[0, T]`.
#[derive(Debug, Clone)]
pub struct HorizonIntegral {
    d: usize,
    a: f64,
    env: RatioEnvelope,
    /// `tails[k] = int_{2^{k+1}}^inf F(m) m^{-p} dm`.
    tails: Vec<f64>,
    tail_estimate: f64,
}

impl HorizonIntegral {
    pub fn new(f: &NonlinearityExpr, u0_l1: f64, d: usize, a_factor: f64, s_max: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::param("d", "dimension must be at least 1"));
        }
        if !(u0_l1 >= 0.0) || !u0_l1.is_finite() {
            return Err(Error::param("u0_l1", "must be non-negative"));
        }
        if !(a_factor > 1.0) {
            return Err(Error::param("A", "must exceed 1"));
        }
        let env = sup_ratio_envelope(f, s_max, EnvelopeOrigin::One)?;
        let p = 1.0 + 2.0 / d as f64;
        let top = (env.s_max().log2() + 1e-9).floor() as usize;
        if top < TAIL_FIT + 2 {
            return Err(Error::EnvelopeTooShort {
                blocks: top,
                required: TAIL_FIT + 2,
            });
        }
        let blocks: Vec<f64> = (1..top)
            .map(|k| weighted_integral(&env, p, 2f64.powi(k as i32), 2f64.powi(k as i32 + 1)))
            .collect::<Result<_>>()?;
        let tail_estimate = extrapolate_tail(&blocks)?;
        let mut tails = vec![0.0; blocks.len() + 1];
        tails[blocks.len()] = tail_estimate;
        for k in (0..blocks.len()).rev() {
            tails[k] = tails[k + 1] + blocks[k];
        }
        let c = smoothing_constant(d);
        Ok(Self {
            d,
            a: 2.0 * a_factor * c * u0_l1,
            env,
            tails,
            tail_estimate,
        })
    }

    fn tail_from(&self, m: f64) -> Result<f64> {
        let p = 1.0 + 2.0 / self.d as f64;
        let k = m.log2().ceil().max(1.0) as usize;
        if k > self.tails.len() {
            return Ok(0.0);
        }
        let anchor = 2f64.powi(k as i32);
        let head = if m < anchor {
            weighted_integral(&self.env, p, m, anchor)?
        } else {
            0.0
        };
        Ok(head + self.tails[k - 1])
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::param("T", "must be non-negative"));
        }
        let df = self.d as f64;
        let f2 = self.env.eval(2.0)?;
        if self.a == 0.0 {
            return Ok(t * f2);
        }
        let s_star = (0.5 * self.a).powf(2.0 / df);
        let scale = (2.0 / df) * self.a.powf(2.0 / df);
        if t <= s_star {
            if t == 0.0 {
                return Ok(0.0);
            }
            Ok(scale * self.tail_from(self.a * t.powf(-df / 2.0))?)
        } else {
            Ok(scale * self.tail_from(2.0)? + (t - s_star) * f2)
        }
    }
}

pub fn smoothing_constant(d: usize) -> f64 {
    (4.0 * std::f64::consts::PI).powf(-(d as f64) / 2.0)
}

/// `int_lo^hi F(s) s^{-p} ds` by Gauss rules on the envelope's own cells.
fn weighted_integral(env: &RatioEnvelope, p: f64, lo: f64, hi: f64) -> Result<f64> {
    let (x, w) = gauss_legendre(GAUSS_POINTS);
    let mut cuts = vec![lo];
    let a = env.grid.partition_point(|&s| s <= lo);
    let b = env.grid.partition_point(|&s| s < hi);
    cuts.extend_from_slice(&env.grid[a..b]);
    cuts.push(hi);
    let mut total = 0.0;
    for seg in cuts.windows(2) {
        let (c, h) = (0.5 * (seg[0] + seg[1]), 0.5 * (seg[1] - seg[0]));
        for (xi, wi) in x.iter().zip(&w) {
            let s = c + h * xi;
            total += wi * h * s.powf(-p) * env.eval(s)?;
        }
    }
    Ok(total)
}

/// Sum of the blocks beyond the last one, from a geometric and a power-law
/// fit of the last few; the larger of the two is kept.
fn extrapolate_tail(blocks: &[f64]) -> Result<f64> {
    let n = blocks.len();
    let last = &blocks[n - TAIL_FIT..];
    if last.iter().any(|v| !v.is_finite()) {
        return Err(Error::IntegralDivergent("envelope overflowed".into()));
    }
    if last.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    if last.iter().any(|&v| v <= 0.0) {
        return Err(Error::IntegralDivergent("blocks mix zero and positive values".into()));
    }
    let k: Vec<f64> = (n - TAIL_FIT..n).map(|i| (i + 1) as f64).collect();
    let ln_k: Vec<f64> = k.iter().map(|v| v.ln()).collect();
    let ln_i: Vec<f64> = last.iter().map(|v| v.ln()).collect();
    let rho = ls_slope(&k, &ln_i).exp();
    let beta = -ls_slope(&ln_k, &ln_i);
    if !(rho < 1.0) || !(beta > 1.0) {
        return Err(Error::IntegralDivergent(format!(
            "dyadic blocks decay too slowly (ratio {rho:.4}, power {beta:.4})"
        )));
    }
    let i_last = last[TAIL_FIT - 1];
    let k_last = k[TAIL_FIT - 1];
    Ok((i_last * rho / (1.0 - rho)).max(i_last * k_last / (beta - 1.0)))
}

pub fn horizon_integral(f: &NonlinearityExpr, u0_l1: f64, d: usize, a_factor: f64, t: f64) -> Result<f64> {
    HorizonIntegral::new(f, u0_l1, d, a_factor, HorizonOptions::default().s_max)?.eval(t)
}

pub fn find_existence_horizon(f: &NonlinearityExpr, u0_l1: f64, d: usize, a_factor: f64) -> Result<HorizonReport> {
    find_existence_horizon_with(f, u0_l1, d, a_factor, &HorizonOptions::default())
}

/// Largest `T <= t_max` with `Phi(T) <= (A - 1) / A`, by bisection in `ln T`.
pub fn find_existence_horizon_with(
    f: &NonlinearityExpr,
    u0_l1: f64,
    d: usize,
    a_factor: f64,
    opts: &HorizonOptions,
) -> Result<HorizonReport> {
    monotonicity_audit(f, 1e12, DEFAULT_AUDIT_SAMPLES)?.require_passed()?;
    let phi = HorizonIntegral::new(f, u0_l1, d, a_factor, opts.s_max)?;
    let bound = (a_factor - 1.0) / a_factor;
    let report = |horizon: f64, integral: f64, capped: bool| HorizonReport {
        horizon,
        integral,
        bound,
        capped,
        d,
        a_factor,
        u0_l1,
        smoothing_constant: smoothing_constant(d),
        tail_estimate: phi.tail_estimate,
    };

    let at_max = phi.eval(opts.t_max)?;
    if at_max <= bound {
        return Ok(report(opts.t_max, at_max, true));
    }
    let mut hi = opts.t_max;
    let mut lo = hi;
    loop {
        lo *= 0.5;
        if lo < 1e-300 {
            return Err(Error::IntegralDivergent("no positive horizon satisfies the condition".into()));
        }
        if phi.eval(lo)? <= bound {
            break;
        }
        hi = lo;
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if phi.eval(mid)? <= bound {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-13 {
            break;
        }
    }
    Ok(report(lo, phi.eval(lo)?, false))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn expr(text: &str) -> NonlinearityExpr {
        NonlinearityExpr::parse(text).unwrap()
    }

    #[test]
    fn linear_in_two_dimensions() {
        // F = 1 and p = 2, so Phi(T) = T.
        for l1 in [0.1, 1.0, 30.0] {
            let r = find_existence_horizon(&expr("s"), l1, 2, 2.0).unwrap();
            assert!((r.horizon - 0.5).abs() < 1e-9, "{}", r.horizon);
            assert!(!r.capped);
        }
    }

    #[test]
    fn square_in_one_dimension() {
        // F(m) = m, p = 3: Phi(T) = 2T + a^2 / 2 once T exceeds (a/2)^2.
        let l1 = 0.1;
        let a = 4.0 * smoothing_constant(1) * l1;
        let r = find_existence_horizon(&expr("s^2"), l1, 1, 2.0).unwrap();
        assert!((r.horizon - (0.25 - a * a / 4.0)).abs() < 1e-9);
        assert!((r.integral - 0.5).abs() < 1e-9);
    }

    #[test]
    fn zero_is_capped_and_mass_shrinks_horizon() {
        let r = find_existence_horizon(&expr("0"), 1.0, 1, 2.0).unwrap();
        assert!(r.capped);
        let f = expr("s + s^1.5");
        let small = find_existence_horizon(&f, 0.5, 2, 2.0).unwrap();
        let large = find_existence_horizon(&f, 1.0, 2, 2.0).unwrap();
        assert!(large.horizon < small.horizon);
        let again = horizon_integral(&f, 0.5, 2, 2.0, small.horizon).unwrap();
        assert!((again - small.integral).abs() < 1e-12 && again <= small.bound);
    }

    #[test]
    fn critical_power_is_divergent() {
        let err = find_existence_horizon(&expr("s^3"), 0.1, 1, 2.0).unwrap_err();
        assert!(matches!(err, Error::IntegralDivergent(_)));
        let err = find_existence_horizon(&expr("s + s^2"), 0.5, 2, 2.0).unwrap_err();
        assert!(matches!(err, Error::IntegralDivergent(_)));
    }
}
