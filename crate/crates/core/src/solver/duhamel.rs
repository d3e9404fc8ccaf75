use std::sync::Arc;

use serde::Serialize;

use super::grid::{RadialField, RadialGrid};
use super::propagator::{ClampStats, HeatPropagator};
use crate::error::{Error, Result};
use crate::nonlinearity::NonlinearityExpr;
use crate::par;

/// Iterates above this are treated as divergence.
pub const OVERFLOW_GUARD: f64 = 1e12;

/// Radial fields on a uniform time grid `t_m = m T / n`, `m = 0..=n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeField {
    #[serde(skip)]
    pub grid: Arc<RadialGrid>,
    pub times: Vec<f64>,
    /// `values[m][i]` at time `t_m` and cell `i`.
    pub values: Vec<Vec<f64>>,
}

impl TimeField {
    pub fn from_fn(grid: Arc<RadialGrid>, horizon: f64, steps: usize, f: impl Fn(f64, usize) -> f64) -> Result<Self> {
        let times = time_grid(horizon, steps)?;
        let values = times
            .iter()
            .map(|&t| (0..grid.len()).map(|i| f(t, i)).collect())
            .collect();
        Ok(Self { grid, times, values })
    }

    /// The same field at every time.
    pub fn steady(u: &RadialField, horizon: f64, steps: usize) -> Result<Self> {
        Self::from_fn(u.grid.clone(), horizon, steps, |_, i| u.values[i])
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("non-empty time grid")
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn at(&self, m: usize) -> RadialField {
        RadialField {
            grid: self.grid.clone(),
            values: self.values[m].clone(),
        }
    }

    /// `a * self + b * other` on a common grid.
    pub fn combine(&self, a: f64, other: &TimeField, b: f64) -> Result<Self> {
        self.check_compatible(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| a * p + b * q).collect())
            .collect();
        Ok(Self {
            grid: self.grid.clone(),
            times: self.times.clone(),
            values,
        })
    }

    /// Piecewise-linear interpolation onto a grid with `factor` times as many steps.
    pub fn refine(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::param("factor", "must be positive"));
        }
        let n = self.steps() * factor;
        let times = time_grid(self.horizon(), n)?;
        let values = (0..=n)
            .map(|k| {
                let (m, j) = (k / factor, k % factor);
                if j == 0 {
                    return self.values[m].clone();
                }
                let w = j as f64 / factor as f64;
                self.values[m]
                    .iter()
                    .zip(&self.values[m + 1])
                    .map(|(a, b)| (1.0 - w) * a + w * b)
                    .collect()
            })
            .collect();
        Ok(Self {
            grid: self.grid.clone(),
            times,
            values,
        })
    }

    pub fn max_abs_diff(&self, other: &TimeField) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .flat_map(|(x, y)| x.iter().zip(y).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max))
    }

    fn check_compatible(&self, other: &TimeField) -> Result<()> {
        if self.times != other.times {
            return Err(Error::GridMismatch("time grids differ".into()));
        }
        if !(Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid) {
            return Err(Error::GridMismatch("radial grids differ".into()));
        }
        Ok(())
    }
}

fn time_grid(horizon: f64, steps: usize) -> Result<Vec<f64>> {
    if !(horizon > 0.0) || !horizon.is_finite() || steps == 0 {
        return Err(Error::param("time grid", "need T > 0 and at least one step"));
    }
    Ok((0..=steps).map(|m| horizon * m as f64 / steps as f64).collect())
}

fn eval_f(f: &NonlinearityExpr, values: &[f64]) -> Result<Vec<f64>> {
    values.iter().map(|&v| f.eval(v.max(0.0))).collect()
}

/// `S(t_m) u0` on a uniform time grid.
pub fn heat_flow(p: &HeatPropagator, u0: &RadialField, horizon: f64, steps: usize) -> Result<(TimeField, ClampStats)> {
    p.check(u0)?;
    let times = time_grid(horizon, steps)?;
    let c0 = p.to_modal(&u0.values);
    let scale = norm(&c0);
    let mut stats = ClampStats::default();
    let mut values = Vec::with_capacity(times.len());
    for &t in &times {
        let mut c = c0.clone();
        p.decay(t, &mut c);
        let mut v = p.from_modal(&c);
        if t == 0.0 {
            v.clone_from(&u0.values);
        } else {
            stats.merge(p.clamp(&mut v, scale));
        }
        values.push(v);
    }
    Ok((
        TimeField {
            grid: p.grid().clone(),
            times,
            values,
        },
        stats,
    ))
}

fn norm(c: &[f64]) -> f64 {
    c.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `F(v)(t) = S(t) u0 + int_0^t S(t - s) f(v(s)) ds` with the time integral
/// by composite trapezoid and exact semigroup factors.
pub fn duhamel_map(p: &HeatPropagator, u0: &RadialField, f: &NonlinearityExpr, v: &TimeField) -> Result<TimeField> {
    Ok(duhamel_map_stats(p, u0, f, v)?.0)
}

fn duhamel_map_stats(
    p: &HeatPropagator,
    u0: &RadialField,
    f: &NonlinearityExpr,
    v: &TimeField,
) -> Result<(TimeField, ClampStats)> {
    p.check(u0)?;
    if !(Arc::ptr_eq(&v.grid, p.grid()) || *v.grid == **p.grid()) {
        return Err(Error::GridMismatch("time field is not on the propagator's grid".into()));
    }
    let h = v.horizon() / v.steps() as f64;
    let g_hat = par::map(&v.values, |vals| -> Result<Vec<f64>> { Ok(p.to_modal(&eval_f(f, vals)?)) })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    if g_hat.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::Divergence {
            iteration: 0,
            message: "f(v) overflowed".into(),
        });
    }

    let c0 = p.to_modal(&u0.values);
    let n = p.len();
    let step: Vec<f64> = p.eigenvalues().iter().map(|l| (-l * h).exp()).collect();
    let mut acc = vec![0.0; n];
    let mut scales = Vec::with_capacity(v.times.len());
    let mut modal = Vec::with_capacity(v.times.len());
    let mut g_norm_sum = 0.0;
    for (m, &t) in v.times.iter().enumerate() {
        if m > 0 {
            for k in 0..n {
                acc[k] = step[k] * (acc[k] + 0.5 * h * g_hat[m - 1][k]) + 0.5 * h * g_hat[m][k];
            }
            g_norm_sum += 0.5 * h * (norm(&g_hat[m - 1]) + norm(&g_hat[m]));
        }
        let mut c = c0.clone();
        p.decay(t, &mut c);
        for (ck, a) in c.iter_mut().zip(&acc) {
            *ck += a;
        }
        scales.push(norm(&c0) + g_norm_sum);
        modal.push(c);
    }
    let results = par::map(&modal, |c| p.from_modal(c));
    let mut stats = ClampStats::default();
    let mut values = Vec::with_capacity(results.len());
    for (m, mut vals) in results.into_iter().enumerate() {
        if m == 0 {
            vals.clone_from(&u0.values);
        } else {
            stats.merge(p.clamp(&mut vals, scales[m]));
        }
        values.push(vals);
    }
    Ok((
        TimeField {
            grid: p.grid().clone(),
            times: v.times.clone(),
            values,
        },
        stats,
    ))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct IterateOptions {
    pub max_iter: usize,
    /// Stop once the sup-norm change falls below this.
    pub tolerance: f64,
    pub guard: f64,
    pub keep_iterates: bool,
}

impl Default for IterateOptions {
    fn default() -> Self {
        Self {
            max_iter: 50,
            tolerance: 1e-8,
            guard: OVERFLOW_GUARD,
            keep_iterates: true,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationTrace {
    pub times: Vec<f64>,
    /// `v_0 = v_init, v_1, ...` (only with `keep_iterates`).
    pub iterates: Vec<TimeField>,
    pub limit: TimeField,
    /// `sup |v_{n+1} - v_n|` per iteration.
    pub deltas: Vec<f64>,
    /// Largest `v_{n+1} - v_n` over all nodes, times and iterations.
    pub max_increase: f64,
    /// Smallest `v_n - S(t) u0` over all iterates after the first.
    pub min_excess: f64,
    pub converged: bool,
    pub iterations: usize,
    /// `sup |F(v_N) - v_N|` for the returned limit.
    pub residual: f64,
    /// Margin of `v_init` as a supersolution.
    pub initial_margin: f64,
    pub clamps: ClampStats,
}

impl IterationTrace {
    pub fn is_monotone(&self, tol: f64) -> bool {
        self.max_increase <= tol
    }
}

/// Monotone iteration `v_{n+1} = F(v_n)` from a supersolution `v_init`.
pub fn duhamel_iterate(
    p: &HeatPropagator,
    u0: &RadialField,
    f: &NonlinearityExpr,
    v_init: &TimeField,
    opts: &IterateOptions,
) -> Result<IterationTrace> {
    let (flow, mut clamps) = heat_flow(p, u0, v_init.horizon(), v_init.steps())?;
    let mut current = v_init.clone();
    let mut iterates = Vec::new();
    if opts.keep_iterates {
        iterates.push(current.clone());
    }
    let mut deltas = Vec::new();
    let mut max_increase = f64::NEG_INFINITY;
    let mut min_excess = f64::INFINITY;
    let mut converged = false;
    let mut initial_margin = f64::NAN;
    let linear = f.is_zero_function();

    for n in 1..=opts.max_iter {
        let (next, stats) = duhamel_map_stats(p, u0, f, &current)?;
        clamps.merge(stats);
        let peak = next.values.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        if !(peak <= opts.guard) {
            return Err(Error::Divergence {
                iteration: n,
                message: format!("iterate reached {peak:e}; the initial guess is not a supersolution"),
            });
        }
        let mut delta = 0.0f64;
        for (a, b) in next.values.iter().flatten().zip(current.values.iter().flatten()) {
            delta = delta.max((a - b).abs());
            max_increase = max_increase.max(a - b);
        }
        if n == 1 {
            initial_margin = current
                .values
                .iter()
                .flatten()
                .zip(next.values.iter().flatten())
                .map(|(v, fv)| v - fv)
                .fold(f64::INFINITY, f64::min);
        }
        for (a, b) in next.values.iter().flatten().zip(flow.values.iter().flatten()) {
            min_excess = min_excess.min(a - b);
        }
        deltas.push(delta);
        current = next;
        if opts.keep_iterates {
            iterates.push(current.clone());
        }
        if delta < opts.tolerance || linear {
            converged = true;
            break;
        }
    }

    let check = duhamel_map(p, u0, f, &current)?;
    let residual = check.max_abs_diff(&current)?;
    Ok(IterationTrace {
        times: current.times.clone(),
        iterations: deltas.len(),
        iterates,
        limit: current,
        deltas,
        max_increase,
        min_excess,
        converged,
        residual,
        initial_margin,
        clamps,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SupersolutionReport {
    /// `min (v - F(v))` over nodes and times; non-negative certifies a
    /// discrete supersolution.
    pub min_margin: f64,
    pub worst_time: f64,
    pub worst_radius: f64,
    /// Per-time minimum of `v - F(v)`.
    pub margins: Vec<f64>,
}

impl SupersolutionReport {
    pub fn passed(&self) -> bool {
        self.min_margin >= 0.0
    }
}

pub fn supersolution_check(
    p: &HeatPropagator,
    u0: &RadialField,
    f: &NonlinearityExpr,
    v: &TimeField,
) -> Result<SupersolutionReport> {
    let fv = duhamel_map(p, u0, f, v)?;
    let mut report = SupersolutionReport {
        min_margin: f64::INFINITY,
        worst_time: 0.0,
        worst_radius: 0.0,
        margins: Vec::with_capacity(v.times.len()),
    };
    for (m, (a, b)) in v.values.iter().zip(&fv.values).enumerate() {
        let mut row = f64::INFINITY;
        for (i, (x, y)) in a.iter().zip(b).enumerate() {
            let margin = x - y;
            row = row.min(margin);
            if margin < report.min_margin {
                report.min_margin = margin;
                report.worst_time = v.times[m];
                report.worst_radius = v.grid.nodes[i];
            }
        }
        report.margins.push(row);
    }
    Ok(report)
}

/// `A S(t) u0 + chi_Omega`, the standard supersolution candidate.
pub fn standard_supersolution(
    p: &HeatPropagator,
    u0: &RadialField,
    a: f64,
    horizon: f64,
    steps: usize,
) -> Result<TimeField> {
    let (flow, _) = heat_flow(p, u0, horizon, steps)?;
    let ones = TimeField::steady(&RadialField::constant(p.grid().clone(), 1.0), horizon, steps)?;
    flow.combine(a, &ones, 1.0)
}
