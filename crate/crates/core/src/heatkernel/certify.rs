use serde::Serialize;

use super::{heat_mass, heat_on_ball_radial, kernel_constants, KernelConstants, Variant, HEAT_TOLERANCE};
use crate::error::{Error, Result};
use crate::par::{self, Mode};

const MAX_WITNESSES: usize = 16;

#[derive(Debug, Clone, Copy)]
pub struct CertifyOptions {
    /// Points on `|x| in [0, r + sqrt t]`.
    pub mesh: usize,
    /// Distance to the boundary for the Dirichlet variant; defaults to the
    /// largest `sqrt t` so that every `t <= delta^2`.
    pub delta: Option<f64>,
    /// Multiplies every constant before checking. Only for falsification runs.
    pub constant_scale: f64,
    pub tolerance: f64,
    pub mode: Mode,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            mesh: 33,
            delta: None,
            constant_scale: 1.0,
            tolerance: HEAT_TOLERANCE,
            mode: Mode::Parallel,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Witness {
    pub r: f64,
    pub t: f64,
    pub x: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub bound: String,
    pub d: usize,
    pub variant: Variant,
    /// `(r, t)` pairs on which the bound was checked.
    pub grid: Vec<(f64, f64)>,
    pub min_margin: f64,
    pub tolerance: f64,
    /// Violations beyond the tolerance (at most 16).
    pub witnesses: Vec<Witness>,
    pub worst: Option<Witness>,
    pub checks: usize,
}

impl BoundReport {
    fn new(bound: &str, d: usize, variant: Variant, tolerance: f64) -> Self {
        Self {
            bound: bound.to_string(),
            d,
            variant,
            grid: Vec::new(),
            min_margin: f64::INFINITY,
            tolerance,
            witnesses: Vec::new(),
            worst: None,
            checks: 0,
        }
    }

    fn record(&mut self, w: Witness) {
        self.checks += 1;
        if w.margin < self.min_margin {
            self.min_margin = w.margin;
            self.worst = Some(w);
        }
        if w.margin < -self.tolerance && self.witnesses.len() < MAX_WITNESSES {
            self.witnesses.push(w);
        }
    }

    pub fn passed(&self) -> bool {
        self.min_margin >= -self.tolerance
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificationReport {
    pub d: usize,
    pub variant: Variant,
    pub delta: Option<f64>,
    pub constants: KernelConstants,
    pub constant_scale: f64,
    pub r_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub bounds: Vec<BoundReport>,
    pub passed: bool,
}

impl CertificationReport {
    pub fn require_passed(&self) -> Result<()> {
        for b in &self.bounds {
            if let Some(w) = b.witnesses.first() {
                return Err(Error::Certification {
                    bound: b.bound.clone(),
                    margin: w.margin,
                    r: w.r,
                    t: w.t,
                    x: w.x,
                });
            }
        }
        Ok(())
    }
}

struct PairResult {
    r: f64,
    t: f64,
    lemma: Vec<Witness>,
    mass: Witness,
    no_tail: Option<Vec<Witness>>,
}

/// Checks, for every `(r, t)`:
/// * `S(t) chi_r >= c_d (r / (r + sqrt t))^d` on `|x| <= r + sqrt t`,
/// * `int S(t) chi_r >= alpha_d r^d`,
/// * `S(t) chi_r >= beta_d` on `|x| <= r + sqrt t` when `t <= r^2`.
///
/// The whole-space variant uses the Gaussian flow itself; the Dirichlet
/// variant uses its lower bound `e^{-d^2 pi^2 t / 4 delta^2}` times the
/// Gaussian flow.
pub fn verify_lower_bounds(
    d: usize,
    r_grid: &[f64],
    t_grid: &[f64],
    variant: Variant,
    opts: &CertifyOptions,
) -> Result<CertificationReport> {
    if r_grid.is_empty() || t_grid.is_empty() {
        return Err(Error::param("grid", "radius and time grids must be non-empty"));
    }
    if r_grid.iter().chain(t_grid).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::param("grid", "radii and times must be positive"));
    }
    if opts.mesh < 2 {
        return Err(Error::param("mesh", "need at least two points"));
    }
    let k = kernel_constants(d, variant)?;
    let t_max = t_grid.iter().cloned().fold(0.0, f64::max);
    let delta = match variant {
        Variant::WholeSpace => None,
        Variant::Dirichlet => {
            let delta = opts.delta.unwrap_or(t_max.sqrt());
            if t_max > delta * delta * (1.0 + 1e-12) {
                return Err(Error::param("delta", "every t must satisfy t <= delta^2"));
            }
            Some(delta)
        }
    };
    let df = d as f64;
    let scale = opts.constant_scale;

    let pairs: Vec<(f64, f64)> = r_grid
        .iter()
        .flat_map(|&r| t_grid.iter().map(move |&t| (r, t)))
        .collect();
    let results = par::map_with(opts.mode, &pairs, |&(r, t)| -> Result<PairResult> {
        let factor = match delta {
            Some(delta) => (-df * df * std::f64::consts::PI.powi(2) * t / (4.0 * delta * delta)).exp(),
            None => 1.0,
        };
        let reach = r + t.sqrt();
        let lemma_bound = scale * k.c_d * (r / reach).powf(df);
        let beta_bound = scale * k.beta_d;
        let short = t <= r * r * (1.0 + 1e-12);
        let mut lemma = Vec::with_capacity(opts.mesh);
        let mut no_tail = short.then(Vec::new);
        for i in 0..opts.mesh {
            let x = reach * i as f64 / (opts.mesh - 1) as f64;
            let v = factor * heat_on_ball_radial(r, x, t, d)?;
            lemma.push(Witness {
                r,
                t,
                x,
                margin: v - lemma_bound,
            });
            if let Some(nt) = no_tail.as_mut() {
                nt.push(Witness {
                    r,
                    t,
                    x,
                    margin: v - beta_bound,
                });
            }
        }
        let m = factor * heat_mass(r, t, d)?;
        let mass = Witness {
            r,
            t,
            x: f64::NAN,
            margin: m - scale * k.alpha_d * r.powf(df),
        };
        Ok(PairResult {
            r,
            t,
            lemma,
            mass,
            no_tail,
        })
    });

    let mut lemma = BoundReport::new("lemma_growth", d, variant, opts.tolerance);
    let mut mass = BoundReport::new("mass", d, variant, opts.tolerance);
    let mut no_tail = BoundReport::new("no_tail", d, variant, opts.tolerance);
    for res in results {
        let res = res?;
        lemma.grid.push((res.r, res.t));
        res.lemma.into_iter().for_each(|w| lemma.record(w));
        mass.grid.push((res.r, res.t));
        mass.record(res.mass);
        if let Some(ws) = res.no_tail {
            no_tail.grid.push((res.r, res.t));
            ws.into_iter().for_each(|w| no_tail.record(w));
        }
    }
    let bounds = vec![lemma, mass, no_tail];
    let passed = bounds.iter().all(BoundReport::passed);
    Ok(CertificationReport {
        d,
        variant,
        delta,
        constants: k,
        constant_scale: scale,
        r_grid: r_grid.to_vec(),
        t_grid: t_grid.to_vec(),
        bounds,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_sweep_passes() {
        let rep = verify_lower_bounds(
            1,
            &[0.25, 1.0, 4.0],
            &[1e-3, 0.0625, 1.0, 16.0],
            Variant::WholeSpace,
            &CertifyOptions::default(),
        )
        .unwrap();
        assert!(rep.passed);
        assert!(rep.require_passed().is_ok());
        assert!(rep.bounds.iter().all(|b| b.min_margin >= 0.0));
    }

    #[test]
    fn inflated_constant_fails_with_witness() {
        let opts = CertifyOptions {
            constant_scale: 40.0,
            ..CertifyOptions::default()
        };
        let rep = verify_lower_bounds(1, &[1.0], &[1.0], Variant::WholeSpace, &opts).unwrap();
        assert!(!rep.passed);
        let err = rep.require_passed().unwrap_err();
        assert!(matches!(err, Error::Certification { .. }));
    }

    #[test]
    fn dirichlet_needs_delta_cover() {
        let opts = CertifyOptions {
            delta: Some(0.1),
            ..CertifyOptions::default()
        };
        assert!(verify_lower_bounds(1, &[1.0], &[1.0], Variant::Dirichlet, &opts).is_err());
        let rep = verify_lower_bounds(1, &[1.0], &[0.01, 1.0], Variant::Dirichlet, &CertifyOptions::default()).unwrap();
        assert_eq!(rep.delta, Some(1.0));
        assert!(rep.passed);
    }
}
