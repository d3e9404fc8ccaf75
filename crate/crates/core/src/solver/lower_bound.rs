use std::sync::Arc;

use serde::Serialize;

use super::grid::{lq_norm, RadialField, RadialGrid};
use crate::error::{Error, Result};
use crate::heatkernel::{heat_on_ball_radial, kernel_constants, sphere_area, BallIndicator, KernelConstants, Variant};
use crate::nonlinearity::NonlinearityExpr;
use crate::par;
use crate::quadrature::{integrate_with_breaks, Options};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LowerBoundMode {
    /// Both semigroup factors replaced by `c_d (r / (r + sqrt t))^d chi_{r + sqrt t}`.
    Certified,
    /// Inner factor bounded by its value on the sphere `|y| = r`, outer
    /// factor the exact heat flow of the ball.
    Quadrature,
}

#[derive(Debug, Clone, Copy)]
pub struct LowerBoundOptions {
    pub mode: LowerBoundMode,
    /// Cells of the output field.
    pub mesh: usize,
    /// Exponent of the reported `L^q` functional.
    pub q: f64,
    /// Distance to the boundary; required by the Dirichlet variant in
    /// quadrature mode.
    pub delta: Option<f64>,
    pub rel_tol: f64,
}

impl Default for LowerBoundOptions {
    fn default() -> Self {
        Self {
            mode: LowerBoundMode::Certified,
            mesh: 128,
            q: 1.0,
            delta: None,
            rel_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LowerBoundReport {
    pub mode: LowerBoundMode,
    pub d: usize,
    pub variant: Variant,
    pub t: f64,
    pub radius: f64,
    pub amplitude: f64,
    pub constants: KernelConstants,
    /// Radius beyond which the bound is zero (or was truncated).
    pub support: f64,
    /// Value on each cell is the bound at the cell's outer face, hence a
    /// lower bound on the whole cell.
    pub field: RadialField,
    pub q: f64,
    pub lq_norm: f64,
}

struct Setup {
    r: f64,
    a: f64,
    t: f64,
    d: usize,
    k: KernelConstants,
    mode: LowerBoundMode,
    damping: Option<f64>,
    rel_tol: f64,
}

impl Setup {
    fn new(chi: &BallIndicator, t: f64, d: usize, variant: Variant, opts: &LowerBoundOptions) -> Result<Self> {
        if chi.center.len() != d || chi.center.iter().any(|c| *c != 0.0) {
            return Err(Error::param("chi", "ball must be centred at the origin of R^d"));
        }
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::param("t", "time must be positive"));
        }
        let k = kernel_constants(d, variant)?;
        let damping = match (variant, opts.mode) {
            (Variant::Dirichlet, LowerBoundMode::Quadrature) => {
                let delta = opts
                    .delta
                    .ok_or_else(|| Error::param("delta", "required for the Dirichlet variant in quadrature mode"))?;
                if t > delta * delta {
                    return Err(Error::param("delta", "need t <= delta^2"));
                }
                let df = d as f64;
                Some(df * df * std::f64::consts::PI.powi(2) / (4.0 * delta * delta))
            }
            _ => None,
        };
        Ok(Self {
            r: chi.radius,
            a: chi.amplitude,
            t,
            d,
            k,
            mode: opts.mode,
            damping,
            rel_tol: opts.rel_tol,
        })
    }

    fn support(&self) -> f64 {
        match self.mode {
            LowerBoundMode::Certified => self.r + (2.0 * self.t).sqrt(),
            LowerBoundMode::Quadrature => self.r + 8.0 * self.t.sqrt(),
        }
    }

    fn factor(&self, tau: f64) -> f64 {
        self.damping.map_or(1.0, |c| (-c * tau).exp())
    }

    fn at(&self, f: &NonlinearityExpr, rho: f64) -> Result<f64> {
        let (r, t, df) = (self.r, self.t, self.d as f64);
        let (lo, hi) = match self.mode {
            LowerBoundMode::Certified => {
                let gap = rho - r;
                if gap <= t.sqrt() {
                    (0.0, t)
                } else if gap * gap >= 2.0 * t {
                    return Ok(0.0);
                } else {
                    let e = 0.5 * (t * t - (gap * gap - t).powi(2)).max(0.0).sqrt();
                    (0.5 * t - e, 0.5 * t + e)
                }
            }
            LowerBoundMode::Quadrature => (0.0, t),
        };
        if hi <= lo {
            return Ok(0.0);
        }
        let mut err = None;
        let integrand = |s: f64| -> f64 {
            let value = match self.mode {
                LowerBoundMode::Certified => {
                    let inner_radius = r + s.sqrt();
                    let h = self.a * self.k.c_d * (r / inner_radius).powf(df);
                    let outer = self.k.c_d * (inner_radius / (inner_radius + (t - s).sqrt())).powf(df);
                    f.eval(h).map(|fv| fv * outer)
                }
                LowerBoundMode::Quadrature => heat_on_ball_radial(r, r, s, self.d).and_then(|inner| {
                    let fv = f.eval(self.a * inner * self.factor(s))?;
                    let outer = heat_on_ball_radial(r, rho, t - s, self.d)? * self.factor(t - s);
                    Ok(fv * outer)
                }),
            };
            value.unwrap_or_else(|e| {
                err.get_or_insert(e);
                0.0
            })
        };
        let est = integrate_with_breaks(
            integrand,
            &[lo, 0.5 * (lo + hi), hi],
            Options {
                abs_tol: 1e-300,
                rel_tol: self.rel_tol,
                max_subdivisions: 4000,
            },
        )?;
        if let Some(e) = err {
            return Err(e);
        }
        Ok(est.value)
    }
}

/// Lower bound on `int_0^t S(t - s) f(S(s) u_k) ds` at `|x| = rho`, for
/// `u_k = amplitude * chi_{B_r}`.
pub fn duhamel_lower_bound_at(
    chi: &BallIndicator,
    f: &NonlinearityExpr,
    t: f64,
    d: usize,
    variant: Variant,
    opts: &LowerBoundOptions,
    rho: f64,
) -> Result<f64> {
    if !(rho >= 0.0) {
        return Err(Error::param("rho", "must be non-negative"));
    }
    Setup::new(chi, t, d, variant, opts)?.at(f, rho)
}

/// The bound on a radial mesh together with its `L^q` norm. The bound is
/// radially non-increasing, so sampling at outer faces keeps it a bound.
pub fn duhamel_lower_bound(
    chi: &BallIndicator,
    f: &NonlinearityExpr,
    t: f64,
    d: usize,
    variant: Variant,
    opts: &LowerBoundOptions,
) -> Result<LowerBoundReport> {
    if opts.mesh < 2 {
        return Err(Error::param("mesh", "need at least two cells"));
    }
    let setup = Setup::new(chi, t, d, variant, opts)?;
    let support = setup.support();
    let grid = Arc::new(RadialGrid::uniform(d, support, opts.mesh)?);
    let values = par::map(&grid.faces[1..], |&rho| setup.at(f, rho))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let field = RadialField::new(grid, values)?;
    let norm = lq_norm(&field, opts.q)?;
    Ok(LowerBoundReport {
        mode: opts.mode,
        d,
        variant,
        t,
        radius: chi.radius,
        amplitude: chi.amplitude,
        constants: setup.k,
        support,
        field,
        q: opts.q,
        lq_norm: norm,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct WarmupShell {
    pub index: usize,
    pub s_lo: f64,
    pub s_hi: f64,
    /// `int_{s_lo}^{s_hi} int_{R^d} f(G_s(x)) dx ds` with `G_s` the Gaussian.
    pub integral: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct WarmupReport {
    pub d: usize,
    pub shells: Vec<WarmupShell>,
    pub partial_sums: Vec<f64>,
}

/// `int_{R^d} f(G_s(x)) dx`, radially with `|x| = 2 sqrt(s) y`.
fn spatial_integral(f: &NonlinearityExpr, s: f64, d: usize) -> Result<f64> {
    let peak = (4.0 * std::f64::consts::PI * s).powf(-(d as f64) / 2.0);
    let y_max = (peak.ln().max(0.0) + 700.0).sqrt();
    let mut breaks = vec![0.0];
    breaks.extend([1.0, 2.0, 4.0, 8.0, 16.0].into_iter().filter(|&b| b < y_max));
    breaks.push(y_max);
    let mut err = None;
    let est = integrate_with_breaks(
        |y| match f.eval(peak * (-y * y).exp()) {
            Ok(v) => v * y.powi(d as i32 - 1),
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        },
        &breaks,
        Options {
            abs_tol: 1e-300,
            rel_tol: 1e-11,
            max_subdivisions: 2000,
        },
    )?;
    if let Some(e) = err {
        return Err(e);
    }
    Ok(sphere_area(d) * (4.0 * s).powf(d as f64 / 2.0) * est.value)
}

/// The heat of a point source fed through `f`, integrated over the dyadic
/// time shells `[2^{-j-1}, 2^{-j}]`, `j = 0..shells`.
pub fn warmup_shells(f: &NonlinearityExpr, d: usize, shells: usize) -> Result<WarmupReport> {
    if d == 0 || shells == 0 {
        return Err(Error::param("warmup", "need d >= 1 and at least one shell"));
    }
    let idx: Vec<usize> = (0..shells).collect();
    let results = par::map(&idx, |&j| -> Result<WarmupShell> {
        let (s_lo, s_hi) = (2f64.powi(-(j as i32) - 1), 2f64.powi(-(j as i32)));
        let mut err = None;
        let est = integrate_with_breaks(
            |s| {
                spatial_integral(f, s, d).unwrap_or_else(|e| {
                    err.get_or_insert(e);
                    0.0
                })
            },
            &[s_lo, s_hi],
            Options {
                abs_tol: 1e-300,
                rel_tol: 1e-9,
                max_subdivisions: 200,
            },
        )?;
        if let Some(e) = err {
            return Err(e);
        }
        Ok(WarmupShell {
            index: j,
            s_lo,
            s_hi,
            integral: est.value,
        })
    });
    let shells = results.into_iter().collect::<Result<Vec<_>>>()?;
    let partial_sums = shells
        .iter()
        .scan(0.0, |acc, sh| {
            *acc += sh.integral;
            Some(*acc)
        })
        .collect();
    Ok(WarmupReport { d, shells, partial_sums })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn expr(text: &str) -> NonlinearityExpr {
        NonlinearityExpr::parse(text).unwrap()
    }

    #[test]
    fn zero_nonlinearity_gives_zero() {
        let chi = BallIndicator::centered(0.5, 3.0, 1).unwrap();
        let rep = duhamel_lower_bound(&chi, &expr("0"), 0.1, 1, Variant::WholeSpace, &LowerBoundOptions::default())
            .unwrap();
        assert!(rep.field.values.iter().all(|&v| v == 0.0));
        assert_eq!(rep.lq_norm, 0.0);
    }

    #[test]
    fn constant_source_matches_closed_form() {
        // f = 1: certified bound is int_0^t c_d (rho / (rho + sqrt(t - s)))^d ds
        // near the origin; for d = 1 and r large it tends to c_d t.
        let chi = BallIndicator::centered(1e6, 1.0, 1).unwrap();
        let k = kernel_constants(1, Variant::WholeSpace).unwrap();
        let v = duhamel_lower_bound_at(&chi, &expr("1"), 1.0, 1, Variant::WholeSpace, &LowerBoundOptions::default(), 0.0)
            .unwrap();
        assert!((v - k.c_d).abs() < 1e-5);
    }

    #[test]
    fn quadrature_mode_dominates_certified_and_is_monotone() {
        let chi = BallIndicator::centered(0.3, 20.0, 1).unwrap();
        let f = expr("s^2");
        let cert = duhamel_lower_bound(&chi, &f, 0.09, 1, Variant::WholeSpace, &LowerBoundOptions::default()).unwrap();
        let opts = LowerBoundOptions {
            mode: LowerBoundMode::Quadrature,
            ..LowerBoundOptions::default()
        };
        for rho in [0.0, 0.3, 0.5] {
            let q = duhamel_lower_bound_at(&chi, &f, 0.09, 1, Variant::WholeSpace, &opts, rho).unwrap();
            let c = duhamel_lower_bound_at(&chi, &f, 0.09, 1, Variant::WholeSpace, &LowerBoundOptions::default(), rho)
                .unwrap();
            assert!(q >= c, "rho {rho}: {q} < {c}");
        }
        assert!(cert.field.values.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(*cert.field.values.last().unwrap(), 0.0);
    }

    #[test]
    fn warmup_shells_of_the_critical_power_are_constant() {
        // f = s^2, d = 2: each shell contributes ln 2 / (8 pi).
        let rep = warmup_shells(&expr("s^2"), 2, 6).unwrap();
        let c = std::f64::consts::LN_2 / (8.0 * std::f64::consts::PI);
        for sh in &rep.shells {
            assert!((sh.integral - c).abs() < 1e-8 * c, "{}", sh.integral);
        }
        assert!((rep.partial_sums[5] - 6.0 * c).abs() < 1e-7 * c);
    }
}
