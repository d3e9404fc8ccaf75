use serde::Serialize;

use super::expr::NonlinearityExpr;
use crate::error::{Error, Result};

/// Grid ratio for envelope sampling.
pub const ENVELOPE_RATIO: f64 = 1.05;
/// Left end used in place of `0` for whole-space envelopes.
pub const ZERO_ORIGIN: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeOrigin {
    /// `F(s) = sup_{1<=t<=s} f(t)/t` (bounded domains).
    One,
    /// `F(s) = sup_{0<t<=s} f(t)/t` (whole space).
    ZeroPlus,
}

/// Running supremum of `f(t)/t` on a geometric grid.
#[derive(Debug, Clone, Serialize)]
pub struct RatioEnvelope {
    #[serde(skip)]
    expr: NonlinearityExpr,
    pub origin: EnvelopeOrigin,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    /// Extrapolated `lim_{t->0} f(t)/t` (whole-space origin only); `inf`
    /// when the small-t samples blow up.
    pub zero_limit_estimate: Option<f64>,
    /// Abscissae of interior maxima located by golden-section refinement.
    pub refined_maxima: Vec<f64>,
}

fn ratio(expr: &NonlinearityExpr, t: f64) -> Result<f64> {
    Ok(expr.eval(t)? / t)
}

/// Builds `F` up to `s_max`. The caller is expected to have audited `f`.
pub fn sup_ratio_envelope(
    expr: &NonlinearityExpr,
    s_max: f64,
    origin: EnvelopeOrigin,
) -> Result<RatioEnvelope> {
    if !(s_max > 1.0) {
        return Err(Error::param("s_max", "must exceed 1"));
    }
    let start = match origin {
        EnvelopeOrigin::One => 1.0,
        EnvelopeOrigin::ZeroPlus => ZERO_ORIGIN,
    };
    let n = ((s_max / start).ln() / ENVELOPE_RATIO.ln()).ceil() as usize + 1;
    let mut grid: Vec<f64> = (0..n).map(|i| start * ENVELOPE_RATIO.powi(i as i32)).collect();
    *grid.last_mut().expect("non-empty grid") = s_max;
    let mut g = grid
        .iter()
        .map(|&t| ratio(expr, t))
        .collect::<Result<Vec<_>>>()?;

    let mut inserts = Vec::new();
    for i in 1..n - 1 {
        if g[i].is_finite() && g[i] >= g[i - 1] && g[i] > g[i + 1] {
            let (t, v) = golden_max(expr, grid[i - 1], grid[i + 1])?;
            if v > g[i] {
                inserts.push((t, v));
            }
        }
    }
    let refined_maxima: Vec<f64> = inserts.iter().map(|(t, _)| *t).collect();
    if !inserts.is_empty() {
        let mut pairs: Vec<(f64, f64)> = grid.into_iter().zip(g).chain(inserts).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        pairs.dedup_by(|a, b| a.0 == b.0);
        (grid, g) = pairs.into_iter().unzip();
    }

    let zero_limit_estimate = match origin {
        EnvelopeOrigin::One => None,
        EnvelopeOrigin::ZeroPlus => Some(zero_limit(&grid, &g)),
    };
    let floor = zero_limit_estimate.unwrap_or(f64::NEG_INFINITY);
    let mut running = floor;
    let values = g
        .iter()
        .map(|&v| {
            running = running.max(v);
            running
        })
        .collect();

    Ok(RatioEnvelope {
        expr: expr.clone(),
        origin,
        grid,
        values,
        zero_limit_estimate,
        refined_maxima,
    })
}

/// Quadratic extrapolation of the three smallest samples to `t = 0`, or
/// `inf` when they grow like a negative power of `t`.
fn zero_limit(grid: &[f64], g: &[f64]) -> f64 {
    let (t0, t1, t2) = (grid[0], grid[1], grid[2]);
    let (g0, g1, g2) = (g[0], g[1], g[2]);
    if !g0.is_finite() {
        return f64::INFINITY;
    }
    if g0 > 0.0 && g2 > 0.0 {
        let slope = (g2.ln() - g0.ln()) / (t2.ln() - t0.ln());
        if slope <= -0.05 {
            return f64::INFINITY;
        }
    }
    // Lagrange interpolation evaluated at 0.
    let l0 = t1 * t2 / ((t0 - t1) * (t0 - t2));
    let l1 = t0 * t2 / ((t1 - t0) * (t1 - t2));
    let l2 = t0 * t1 / ((t2 - t0) * (t2 - t1));
    (g0 * l0 + g1 * l1 + g2 * l2).max(0.0)
}

fn golden_max(expr: &NonlinearityExpr, mut a: f64, mut b: f64) -> Result<(f64, f64)> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = ratio(expr, c)?;
    let mut fd = ratio(expr, d)?;
    for _ in 0..80 {
        if (b - a) <= 1e-15 * b {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = ratio(expr, c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = ratio(expr, d)?;
        }
    }
    Ok(if fc > fd { (c, fc) } else { (d, fd) })
}

impl RatioEnvelope {
    pub fn expr(&self) -> &NonlinearityExpr {
        &self.expr
    }

    pub fn s_max(&self) -> f64 {
        *self.grid.last().expect("non-empty grid")
    }

    /// `F(s)` at an arbitrary abscissa: the grid value at the last node not
    /// exceeding `s`, raised by `f(s)/s` itself.
    pub fn eval(&self, s: f64) -> Result<f64> {
        let idx = self.grid.partition_point(|&t| t <= s);
        if idx == 0 {
            return Ok(self.values[0]);
        }
        let own = ratio(&self.expr, s)?;
        Ok(self.values[idx - 1].max(own))
    }

    /// Whether any sample overflowed to `+inf`.
    pub fn overflowed(&self) -> bool {
        self.values.iter().any(|v| v.is_infinite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(text: &str, s_max: f64) -> RatioEnvelope {
        sup_ratio_envelope(&NonlinearityExpr::parse(text).unwrap(), s_max, EnvelopeOrigin::One).unwrap()
    }

    #[test]
    fn increasing_ratio() {
        let e = env("s^2", 100.0);
        assert!((e.eval(10.0).unwrap() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn decreasing_ratio_sticks_at_one() {
        let e = env("s^0.5", 1000.0);
        assert!((e.eval(100.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(e.values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn interior_maximum_is_refined() {
        // f(t)/t = 4t/(4+t^2) peaks at t = 2 with value 1.
        let e = env("4*s^2/(4+s^2)", 1e3);
        assert_eq!(e.refined_maxima.len(), 1);
        assert!((e.refined_maxima[0] - 2.0).abs() < 1e-6);
        assert!((e.eval(500.0).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn whole_space_origin() {
        let f = NonlinearityExpr::parse("s + s^2").unwrap();
        let e = sup_ratio_envelope(&f, 10.0, EnvelopeOrigin::ZeroPlus).unwrap();
        assert!((e.zero_limit_estimate.unwrap() - 1.0).abs() < 1e-9);
        let g = NonlinearityExpr::parse("s^0.5").unwrap();
        let e = sup_ratio_envelope(&g, 10.0, EnvelopeOrigin::ZeroPlus).unwrap();
        assert_eq!(e.zero_limit_estimate, Some(f64::INFINITY));
    }

    #[test]
    fn rejects_short_range() {
        let f = NonlinearityExpr::parse("s").unwrap();
        assert!(sup_ratio_envelope(&f, 1.0, EnvelopeOrigin::One).is_err());
    }
}
