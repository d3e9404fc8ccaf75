//! Gaussian heat kernel, heat flow of ball indicators, the lower-bound
//! constants `c_d`, `alpha_d`, `beta_d` and their numerical certification.

mod certify;
mod constants;

use serde::Serialize;
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::quadrature::{integrate_with_breaks, Options};

pub use certify::{verify_lower_bounds, BoundReport, CertificationReport, CertifyOptions, Witness};
pub use constants::{kernel_constants, KernelConstants, Variant};

/// Absolute tolerance of [`heat_on_ball`] for `d >= 2`.
pub const HEAT_TOLERANCE: f64 = 1e-8;
/// Half-width of the radial window, in units of `sqrt(t)`, outside which the
/// Gaussian factor is below `e^-49`.
const WINDOW: f64 = 14.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallIndicator {
    pub radius: f64,
    pub center: Vec<f64>,
    pub amplitude: f64,
}

impl BallIndicator {
    /// Ball of the given radius at the origin of `R^d`.
    pub fn centered(radius: f64, amplitude: f64, d: usize) -> Result<Self> {
        Self::new(radius, vec![0.0; d], amplitude)
    }

    pub fn new(radius: f64, center: Vec<f64>, amplitude: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::param("radius", "must be positive"));
        }
        if !(amplitude >= 0.0) || !amplitude.is_finite() {
            return Err(Error::param("amplitude", "must be non-negative"));
        }
        if center.is_empty() {
            return Err(Error::param("center", "dimension must be at least 1"));
        }
        Ok(Self {
            radius,
            center,
            amplitude,
        })
    }
}

/// Volume of the unit ball in `R^d`.
pub fn omega(d: usize) -> f64 {
    // omega_d = (2 pi / d) omega_{d-2}, omega_0 = 1, omega_1 = 2.
    let mut w = if d % 2 == 0 { 1.0 } else { 2.0 };
    let mut k = d % 2;
    while k < d {
        k += 2;
        w *= 2.0 * std::f64::consts::PI / k as f64;
    }
    w
}

/// Surface area of the unit sphere `S^{d-1}`.
pub fn sphere_area(d: usize) -> f64 {
    d as f64 * omega(d)
}

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::param("t", "time must be positive"));
    }
    Ok(())
}

/// `(4 pi t)^{-d/2} exp(-|x - y|^2 / 4t)`.
pub fn gaussian_kernel(x: &[f64], y: &[f64], t: f64, d: usize) -> Result<f64> {
    check_time(t)?;
    if x.len() != d || y.len() != d {
        return Err(Error::param("x, y", format!("points must have {d} coordinates")));
    }
    let r2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((4.0 * std::f64::consts::PI * t).powf(-(d as f64) / 2.0) * (-r2 / (4.0 * t)).exp())
}

/// `[S(t) chi](x)` on `R^d`.
pub fn heat_on_ball(chi: &BallIndicator, x: &[f64], t: f64, d: usize) -> Result<f64> {
    if x.len() != d || chi.center.len() != d {
        return Err(Error::param("x", format!("points must have {d} coordinates")));
    }
    let rho = x
        .iter()
        .zip(&chi.center)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(chi.amplitude * heat_on_ball_radial(chi.radius, rho, t, d)?)
}

/// `[S(t) chi_{B_r}](x)` with `|x| = rho`. Closed form for `d = 1`,
/// radial-angular quadrature otherwise.
pub fn heat_on_ball_radial(r: f64, rho: f64, t: f64, d: usize) -> Result<f64> {
    check_time(t)?;
    if d == 1 {
        let s = 2.0 * t.sqrt();
        return Ok(0.5 * (erf((rho + r) / s) - erf((rho - r) / s)));
    }
    heat_on_ball_quadrature(r, rho, t, d, HEAT_TOLERANCE)
}

/// The quadrature path, available in every dimension (used to cross-check
/// the `d = 1` closed form).
pub fn heat_on_ball_quadrature(r: f64, rho: f64, t: f64, d: usize, tol: f64) -> Result<f64> {
    check_time(t)?;
    if d == 0 {
        return Err(Error::param("d", "dimension must be at least 1"));
    }
    if !(r > 0.0) || !(rho >= 0.0) {
        return Err(Error::param("r, rho", "need r > 0 and rho >= 0"));
    }
    let sq = t.sqrt();
    let lo = (rho - WINDOW * sq).max(0.0);
    let hi = (rho + WINDOW * sq).min(r);
    if lo >= hi {
        return Ok(0.0);
    }
    let mut breaks = vec![lo];
    if rho > lo && rho < hi {
        breaks.push(rho);
    }
    breaks.push(hi);
    let opts = Options {
        abs_tol: tol / 4.0,
        rel_tol: 0.0,
        max_subdivisions: 4000,
    };
    let pref = (4.0 * std::f64::consts::PI * t).powf(-(d as f64) / 2.0);

    if d == 1 {
        // Both half-lines y = +sigma and y = -sigma.
        let est = integrate_with_breaks(
            |s| pref * ((-(rho - s).powi(2) / (4.0 * t)).exp() + (-(rho + s).powi(2) / (4.0 * t)).exp()),
            &breaks,
            opts,
        )?;
        return Ok(est.value);
    }

    let mut inner_err = None;
    let est = integrate_with_breaks(
        |sigma| {
            let a = rho * sigma / (2.0 * t);
            let ang = match angular(a, d) {
                Ok(v) => v,
                Err(e) => {
                    inner_err.get_or_insert(e);
                    0.0
                }
            };
            pref * sigma.powi(d as i32 - 1) * (-(rho - sigma).powi(2) / (4.0 * t)).exp() * ang
        },
        &breaks,
        opts,
    )?;
    if let Some(e) = inner_err {
        return Err(e);
    }
    Ok(est.value)
}

/// `int_{S^{d-1}} exp(-a (1 - cos phi)) d omega`, `phi` the angle to a fixed axis.
fn angular(a: f64, d: usize) -> Result<f64> {
    if a <= 0.0 {
        return Ok(sphere_area(d));
    }
    if d == 3 {
        return Ok(2.0 * std::f64::consts::PI * (-(-2.0 * a).exp_m1()) / a);
    }
    let m = d as i32 - 2;
    let area = sphere_area(d - 1);
    let cut = (12.0 / a.sqrt()).min(std::f64::consts::PI);
    let mut breaks = vec![0.0, cut];
    if cut < std::f64::consts::PI {
        breaks.push(std::f64::consts::PI);
    }
    let est = integrate_with_breaks(
        |phi| {
            let half = (0.5 * phi).sin();
            phi.sin().powi(m) * (-2.0 * a * half * half).exp()
        },
        &breaks,
        Options {
            abs_tol: 1e-14,
            rel_tol: 1e-11,
            max_subdivisions: 500,
        },
    )?;
    Ok(area * est.value)
}

/// Total heat `int_{R^d} [S(t) chi_{B_r}] dx`, by radial quadrature.
pub fn heat_mass(r: f64, t: f64, d: usize) -> Result<f64> {
    check_time(t)?;
    let hi = r + WINDOW * t.sqrt();
    let area = sphere_area(d);
    let mut err = None;
    let est = integrate_with_breaks(
        |rho| match heat_on_ball_radial(r, rho, t, d) {
            Ok(v) => area * rho.powi(d as i32 - 1) * v,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        },
        &[0.0, r, hi],
        Options {
            abs_tol: HEAT_TOLERANCE * omega(d) * r.powi(d as i32),
            rel_tol: 0.0,
            max_subdivisions: 2000,
        },
    )?;
    if let Some(e) = err {
        return Err(e);
    }
    Ok(est.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn kernel_normalisation_point() {
        let v = gaussian_kernel(&[0.3], &[0.3], 1.0 / (4.0 * PI), 1).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        let v = gaussian_kernel(&[0.0], &[2.0], 1.0, 1).unwrap();
        assert!((v - (4.0 * PI).powf(-0.5) * (-1.0f64).exp()).abs() < 1e-16);
        assert!(gaussian_kernel(&[0.0], &[0.0], 0.0, 1).is_err());
    }

    #[test]
    fn unit_ball_volumes() {
        assert!((omega(1) - 2.0).abs() < 1e-14);
        assert!((omega(2) - PI).abs() < 1e-14);
        assert!((omega(3) - 4.0 * PI / 3.0).abs() < 1e-14);
    }

    #[test]
    fn quadrature_matches_closed_form_in_one_dimension() {
        for &(r, rho, t) in &[(1.0, 2.0, 1.0), (0.25, 0.1, 1e-3), (4.0, 4.5, 16.0), (1.0, 0.0, 0.01)] {
            let a = heat_on_ball_radial(r, rho, t, 1).unwrap();
            let b = heat_on_ball_quadrature(r, rho, t, 1, 1e-12).unwrap();
            assert!((a - b).abs() < 1e-10, "{r} {rho} {t}: {a} vs {b}");
        }
    }

    #[test]
    fn small_time_limit_is_the_indicator() {
        for d in 1..=3 {
            assert!((heat_on_ball_radial(1.0, 0.5, 1e-6, d).unwrap() - 1.0).abs() < 1e-7);
            assert!(heat_on_ball_radial(1.0, 1.5, 1e-6, d).unwrap().abs() < 1e-7);
        }
    }

    #[test]
    fn mass_is_conserved() {
        for d in 1..=3 {
            for &(r, t) in &[(1.0, 0.1), (0.25, 1.0)] {
                let m = heat_mass(r, t, d).unwrap();
                let exact = omega(d) * r.powi(d as i32);
                assert!((m - exact).abs() < 1e-6 * exact.max(1.0), "d={d} r={r} t={t}: {m} vs {exact}");
            }
        }
    }

    #[test]
    fn two_and_four_dimensional_angular_paths_agree_with_centre_value() {
        // At the centre the heat is P(|Z| < r / sqrt(2t)) for a standard
        // Gaussian vector; for d = 2 that is 1 - exp(-r^2 / 4t).
        let v = heat_on_ball_radial(1.0, 0.0, 0.25, 2).unwrap();
        assert!((v - (1.0 - (-1.0f64).exp())).abs() < 1e-8);
        // d = 4: 1 - exp(-x)(1 + x) with x = r^2 / 4t.
        let v = heat_on_ball_radial(1.0, 1e-9, 0.25, 4).unwrap();
        assert!((v - (1.0 - 2.0 * (-1.0f64).exp())).abs() < 1e-8);
    }
}
