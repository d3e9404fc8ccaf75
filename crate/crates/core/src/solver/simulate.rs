use std::path::Path;

use serde::Serialize;

use super::grid::{lq_norm_values, RadialField};
use super::propagator::HeatPropagator;
use crate::error::{Error, Result};
use crate::nonlinearity::NonlinearityExpr;
use crate::report::write_csv_rows;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SimulateOptions {
    pub dt0: f64,
    pub dt_max: f64,
    /// Numeric blow-up once the step would have to drop below this.
    pub dt_min: f64,
    /// Numeric blow-up once `|u|_inf` exceeds this.
    pub blowup_norm: f64,
    /// Halve the step when the reaction increment `dt |f(u)|_inf / |u|_inf`
    /// exceeds this...
    pub shrink_above: f64,
    /// ...and double it after a step whose increment stayed below this.
    pub grow_below: f64,
    pub adaptive: bool,
    /// Exponent of the tracked `L^q` norm.
    pub q: f64,
    pub max_steps: usize,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        Self {
            dt0: 1e-4,
            dt_max: 1e-2,
            dt_min: 1e-14,
            blowup_norm: 1e12,
            shrink_above: 0.05,
            grow_below: 0.01,
            adaptive: true,
            q: 2.0,
            max_steps: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub l1: f64,
    pub lq: f64,
    pub linf: f64,
    pub dt: f64,
    pub clamp_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BlowupReason {
    NormGuard,
    StepSize,
    Overflow,
}

/// A numeric blow-up declaration: a threshold was crossed. Not a proof.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NumericBlowup {
    pub t: f64,
    pub reason: BlowupReason,
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub q: f64,
    pub horizon: f64,
    pub samples: Vec<TrajectorySample>,
    pub blowup: Option<NumericBlowup>,
    pub final_field: RadialField,
    pub steps: usize,
    pub rejected: usize,
}

impl Trajectory {
    pub fn peak_l1(&self) -> f64 {
        self.samples.iter().map(|s| s.l1).fold(0.0, f64::max)
    }

    pub fn final_time(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }

    /// `t, l1, lq, linf, dt, clamp_count` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let rows: Vec<Vec<f64>> = self
            .samples
            .iter()
            .map(|s| vec![s.t, s.l1, s.lq, s.linf, s.dt, s.clamp_count as f64])
            .collect();
        write_csv_rows(path, &["t", "l1", "lq", "linf", "dt", "clamp_count"], &rows)
    }
}

fn sample(p: &HeatPropagator, u: &[f64], t: f64, dt: f64, q: f64, clamp_count: usize) -> Result<TrajectorySample> {
    let grid = p.grid();
    Ok(TrajectorySample {
        t,
        l1: lq_norm_values(grid, u, 1.0)?,
        lq: lq_norm_values(grid, u, q)?,
        linf: lq_norm_values(grid, u, f64::INFINITY)?,
        dt,
        clamp_count,
    })
}

/// Steps `u <- S(dt)(u + dt f(u))` up to `horizon` or numeric blow-up.
pub fn simulate_forward(
    p: &HeatPropagator,
    u0: &RadialField,
    f: &NonlinearityExpr,
    horizon: f64,
    opts: &SimulateOptions,
) -> Result<Trajectory> {
    p.check(u0)?;
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::param("T", "horizon must be positive"));
    }
    if !(opts.dt0 > 0.0) || !(opts.dt_max >= opts.dt0) || !(opts.dt_min > 0.0) {
        return Err(Error::param("dt", "need 0 < dt0 <= dt_max and dt_min > 0"));
    }
    if !(opts.q >= 1.0) {
        return Err(Error::param("q", "must be at least 1"));
    }
    let mut u = u0.values.clone();
    let mut t = 0.0;
    let mut dt = opts.dt0;
    let mut samples = vec![sample(p, &u, t, 0.0, opts.q, 0)?];
    let mut blowup = None;
    let (mut steps, mut rejected) = (0, 0);

    while t < horizon && steps < opts.max_steps {
        let step = dt.min(horizon - t);
        let fu: Vec<f64> = u.iter().map(|&v| f.eval(v.max(0.0))).collect::<Result<_>>()?;
        let f_sup = fu.iter().fold(0.0f64, |m, v| m.max(*v));
        if !f_sup.is_finite() {
            blowup = Some(NumericBlowup {
                t,
                reason: BlowupReason::Overflow,
            });
            break;
        }
        let u_sup = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let change = if u_sup > 0.0 { step * f_sup / u_sup } else { step * f_sup };
        if opts.adaptive && change > opts.shrink_above {
            dt = 0.5 * step;
            rejected += 1;
            if dt < opts.dt_min {
                blowup = Some(NumericBlowup {
                    t,
                    reason: BlowupReason::StepSize,
                });
                break;
            }
            continue;
        }
        let rhs: Vec<f64> = u.iter().zip(&fu).map(|(a, b)| a + step * b).collect();
        let (next, stats) = p.apply_values(step, &rhs);
        u = next;
        t += step;
        steps += 1;
        let s = sample(p, &u, t, step, opts.q, stats.clamped)?;
        samples.push(s);
        if !(s.linf <= opts.blowup_norm) {
            blowup = Some(NumericBlowup {
                t,
                reason: BlowupReason::NormGuard,
            });
            break;
        }
        if opts.adaptive && change < opts.grow_below {
            dt = (2.0 * step).min(opts.dt_max);
        }
    }
    Ok(Trajectory {
        q: opts.q,
        horizon,
        samples,
        blowup,
        final_field: RadialField {
            grid: p.grid().clone(),
            values: u,
        },
        steps,
        rejected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{build_propagator, RadialGrid};
    use std::sync::Arc;

    fn setup(n: usize) -> HeatPropagator {
        build_propagator(Arc::new(RadialGrid::uniform(1, 2.0, n).unwrap())).unwrap()
    }

    #[test]
    fn heat_flow_contracts_l2() {
        let p = setup(128);
        let u0 = RadialField::ball(p.grid().clone(), 0.5, 1.0);
        let f = NonlinearityExpr::parse("0").unwrap();
        let tr = simulate_forward(&p, &u0, &f, 1.0, &SimulateOptions::default()).unwrap();
        assert!(tr.blowup.is_none());
        assert!((tr.final_time() - 1.0).abs() < 1e-12);
        assert!(tr.samples.windows(2).all(|w| w[1].lq <= w[0].lq + 1e-14));
    }

    #[test]
    fn large_data_blows_up_numerically() {
        let p = setup(64);
        let u0 = RadialField::ball(p.grid().clone(), 1.0, 10.0);
        let f = NonlinearityExpr::parse("s^3").unwrap();
        let tr = simulate_forward(&p, &u0, &f, 1.0, &SimulateOptions::default()).unwrap();
        let b = tr.blowup.expect("blow-up");
        // The ODE u' = u^3 from 10 blows up at 1 / 200.
        assert!(b.t < 0.01, "{b:?}");
    }
}
