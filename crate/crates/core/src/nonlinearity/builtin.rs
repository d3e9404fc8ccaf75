use std::collections::BTreeMap;

use serde::Serialize;

use super::expr::NonlinearityExpr;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// `s^p`
    Power { p: f64 },
    /// `s^p / log(e + s)^beta` with `p = 1 + 2/d`.
    LogFamily { d: f64, beta: f64 },
    /// `max(s^p_low, knee^(p_low - p_high) s^p_high)`: `s^p_low` below the
    /// knee, a continuous switch to `s^p_high` above it.
    PiecewisePower { p_low: f64, p_high: f64, knee: f64 },
}

impl Family {
    pub fn from_name(name: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let get = |key: &str| {
            params
                .get(key)
                .copied()
                .ok_or_else(|| Error::param(key, format!("required by family `{name}`")))
        };
        match name {
            "power" => Ok(Family::Power { p: get("p")? }),
            "log_family" => Ok(Family::LogFamily {
                d: get("d")?,
                beta: get("beta")?,
            }),
            "piecewise_power" => Ok(Family::PiecewisePower {
                p_low: get("p_low")?,
                p_high: get("p_high")?,
                knee: get("knee")?,
            }),
            other => Err(Error::UnknownFamily(other.to_string())),
        }
    }

    fn source_text(&self) -> Result<String> {
        match *self {
            Family::Power { p } => {
                if !(p >= 0.0) || !p.is_finite() {
                    return Err(Error::param("p", "must be a finite non-negative exponent"));
                }
                Ok(format!("s^{p}"))
            }
            Family::LogFamily { d, beta } => {
                if !(d >= 1.0) || !d.is_finite() {
                    return Err(Error::param("d", "dimension must be at least 1"));
                }
                if !(beta >= 0.0) || !beta.is_finite() {
                    return Err(Error::param("beta", "must be non-negative"));
                }
                let p = 1.0 + 2.0 / d;
                Ok(format!("s^{p}/log(e+s)^{beta}"))
            }
            Family::PiecewisePower { p_low, p_high, knee } => {
                if !(p_low >= 0.0) || !(p_high >= 0.0) {
                    return Err(Error::param("p_low/p_high", "exponents must be non-negative"));
                }
                if !(knee > 0.0) || !knee.is_finite() {
                    return Err(Error::param("knee", "must be positive"));
                }
                let scale = knee.powf(p_low - p_high);
                Ok(format!("max(s^{p_low}, {scale}*s^{p_high})"))
            }
        }
    }
}

/// Builds the expression tree for a built-in family.
pub fn builtin_family(family: Family) -> Result<NonlinearityExpr> {
    NonlinearityExpr::parse(&family.source_text()?)
}

pub fn builtin_by_name(name: &str, params: &BTreeMap<String, f64>) -> Result<NonlinearityExpr> {
    builtin_family(Family::from_name(name, params)?)
}

/// Largest positive root of `e^x = e^2 x`, by bisection on `[2, 4]`.
pub fn log_family_lambda() -> f64 {
    let h = |x: f64| x.exp() - std::f64::consts::E.powi(2) * x;
    let (mut a, mut b) = (2.0_f64, 4.0_f64);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if h(m) < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// `lambda * p`: the largest `beta` for which the log family is non-decreasing.
pub fn log_family_beta_max(d: f64) -> f64 {
    log_family_lambda() * (1.0 + 2.0 / d)
}
