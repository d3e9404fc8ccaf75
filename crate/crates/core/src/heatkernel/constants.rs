use serde::Serialize;

use super::{heat_on_ball_radial, omega};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Includes the boundary factor `e^{-d^2 pi^2 / 4}`.
    Dirichlet,
    WholeSpace,
}

impl Variant {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "dirichlet" => Ok(Variant::Dirichlet),
            "whole_space" | "whole-space" => Ok(Variant::WholeSpace),
            other => Err(Error::param("variant", format!("unknown variant `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelConstants {
    pub d: usize,
    pub variant: Variant,
    pub boundary_factor: f64,
    pub c_prime: f64,
    pub c_doubleprime: f64,
    pub c_d: f64,
    pub alpha_d: f64,
    /// Taken as `c_d 2^-d`.
    pub beta_d: f64,
    pub omega_d: f64,
}

/// `c'_d = factor pi^{-d/2} int_{B_{1/2}(u)} e^{-|w|^2} dw`, which is the
/// heat at distance 1 from the centre of a ball of radius 1/2 at time 1/4.
pub fn kernel_constants(d: usize, variant: Variant) -> Result<KernelConstants> {
    if d == 0 {
        return Err(Error::param("d", "dimension must be at least 1"));
    }
    let df = d as f64;
    let boundary_factor = match variant {
        Variant::Dirichlet => (-df * df * std::f64::consts::PI.powi(2) / 4.0).exp(),
        Variant::WholeSpace => 1.0,
    };
    let c_prime = boundary_factor * heat_on_ball_radial(0.5, 1.0, 0.25, d)?;
    let c_doubleprime =
        boundary_factor * std::f64::consts::PI.powf(-df / 2.0) * 2f64.powf(-df) * (-2.25f64).exp();
    let c_d = c_prime.min(c_doubleprime);
    let omega_d = omega(d);
    Ok(KernelConstants {
        d,
        variant,
        boundary_factor,
        c_prime,
        c_doubleprime,
        c_d,
        alpha_d: c_d * omega_d,
        beta_d: c_d * 2f64.powf(-df),
        omega_d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::erf::erf;

    #[test]
    fn one_dimensional_c_prime() {
        let k = kernel_constants(1, Variant::WholeSpace).unwrap();
        assert!((k.c_prime - 0.5 * (erf(1.5) - erf(0.5))).abs() < 1e-15);
        assert_eq!(k.alpha_d, k.c_d * k.omega_d);
    }

    #[test]
    fn dirichlet_is_smaller_and_in_unit_interval() {
        for d in 1..=3 {
            let w = kernel_constants(d, Variant::WholeSpace).unwrap();
            let b = kernel_constants(d, Variant::Dirichlet).unwrap();
            assert!(b.c_d < w.c_d);
            for k in [w, b] {
                assert!(k.c_d > 0.0 && k.c_d < 1.0);
            }
        }
    }
}
