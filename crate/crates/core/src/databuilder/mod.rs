//! Truncated blow-up initial data: nested sums of ball indicators centred at
//! the origin, with their schedules and predicted lower bounds.

mod t1;
mod todd;

use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::heatkernel::{omega, KernelConstants, Variant};
use crate::nonlinearity::NonlinearityExpr;
use crate::solver::{lq_norm, RadialField, RadialGrid};

pub use t1::{build_t1_data, build_t1_data_with, T1Options};
pub use todd::{build_todd_data, build_todd_data_with, KSchedule, ToddOptions, ToddSchedule};

/// Each ball must contain at least this many whole cells.
pub const MIN_CELLS_PER_BALL: usize = 8;
/// Allowed relative gap between the sampled and the exact `L^q` norm.
pub const NORM_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DataKind {
    T1,
    Todd,
}

/// One ball `amplitude * chi_{B_radius}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DataTerm {
    /// `k` for T1, `n` for Todd.
    pub index: usize,
    /// `phi_k` for T1, `phi_{zeta_n}` for Todd.
    pub phi: f64,
    pub amplitude: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BlowupDataSpec {
    pub kind: DataKind,
    pub d: usize,
    pub q: f64,
    /// `1 + 2q/d`.
    pub p: f64,
    pub f: NonlinearityExpr,
    /// Truncation level `N`.
    pub n_terms: usize,
    /// Radius of the domain ball.
    pub domain_radius: f64,
    pub variant: Variant,
    pub constants: KernelConstants,
    pub epsilon: Option<f64>,
    pub todd: Option<ToddSchedule>,
    pub terms: Vec<DataTerm>,
    /// `|u0|_q` of the field on the grid.
    pub norm_sampled: f64,
    /// `|u0|_q` of the truncated sum, computed shell by shell.
    pub norm_exact: f64,
    /// Sum of the per-term norms.
    pub norm_bound: f64,
    /// Bound on the norm of the neglected terms `k > N`.
    pub tail_bound: f64,
    pub predicted: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct T1Prediction {
    pub k: usize,
    pub t_lo: f64,
    /// `t_k = r_k^2`.
    pub t_hi: f64,
    /// Pointwise bound `beta_d r_k^2 f(phi_k)` on `B_{r_k}` at `t_k`.
    pub pointwise: f64,
    /// `omega_d r_k^d pointwise^q`.
    pub lq_power: f64,
    /// `beta_d^q omega_d eps^{d+2q} k^{-2q(d+2q)/d} e^k`, below `lq_power`.
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ToddPrediction {
    pub n: usize,
    /// `n^-2`.
    pub psi: f64,
    pub k0: usize,
    pub k_n: usize,
    pub zeta: usize,
    /// `sum_{k0 <= k <= k_n} f(s_k) s_k^-p`.
    pub series_sum: f64,
    /// `psi^p series_sum`; the proof's constant is not included.
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", content = "terms", rename_all = "snake_case")]
pub enum Predictions {
    T1(Vec<T1Prediction>),
    Todd(Vec<ToddPrediction>),
}

impl Predictions {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Predictions::T1(v) => v.iter().map(|p| p.value).collect(),
            Predictions::Todd(v) => v.iter().map(|p| p.value).collect(),
        }
    }
}

pub fn predicted_bounds(spec: &BlowupDataSpec) -> Result<Predictions> {
    match spec.kind {
        DataKind::T1 => t1::predict(spec).map(Predictions::T1),
        DataKind::Todd => todd::predict(spec).map(Predictions::Todd),
    }
}

/// Grid used when the caller gives none: cells of `r_min / 16` at the
/// centre, growing geometrically.
#[derive(Debug, Clone)]
pub struct GridChoice {
    pub growth: f64,
    pub cells_per_ball: usize,
    pub max_cell: Option<f64>,
    pub grid: Option<Arc<RadialGrid>>,
}

impl Default for GridChoice {
    fn default() -> Self {
        Self {
            growth: 1.05,
            cells_per_ball: 16,
            max_cell: None,
            grid: None,
        }
    }
}

impl GridChoice {
    fn resolve(&self, d: usize, domain_radius: f64, terms: &[DataTerm]) -> Result<Arc<RadialGrid>> {
        let r_min = terms.iter().map(|t| t.radius).fold(f64::INFINITY, f64::min);
        let grid = match &self.grid {
            Some(g) => {
                if g.d != d || (g.radius - domain_radius).abs() > 1e-12 * domain_radius {
                    return Err(Error::param("grid", "dimension or radius differs from the data"));
                }
                g.clone()
            }
            None => {
                let h_min = r_min / self.cells_per_ball.max(MIN_CELLS_PER_BALL) as f64;
                let h_max = self.max_cell.unwrap_or(domain_radius / 64.0).max(h_min);
                Arc::new(RadialGrid::graded(d, domain_radius, h_min, self.growth, h_max)?)
            }
        };
        for t in terms {
            let cells = grid.cells_inside(t.radius);
            if cells < MIN_CELLS_PER_BALL {
                return Err(Error::param(
                    "grid",
                    format!(
                        "ball {} of radius {:.3e} covers {cells} cells, need {MIN_CELLS_PER_BALL}",
                        t.index, t.radius
                    ),
                ));
            }
        }
        Ok(grid)
    }
}

/// `|sum a_j chi_{B_{r_j}}|_q` for balls at the origin.
pub fn nested_norm(terms: &[DataTerm], d: usize, q: f64) -> f64 {
    let mut sorted: Vec<&DataTerm> = terms.iter().collect();
    sorted.sort_by(|a, b| b.radius.total_cmp(&a.radius));
    let di = d as i32;
    let w = omega(d);
    let mut level = 0.0;
    let mut total = 0.0;
    for (j, t) in sorted.iter().enumerate() {
        level += t.amplitude;
        let inner = sorted.get(j + 1).map_or(0.0, |n| n.radius);
        total += level.powf(q) * w * (t.radius.powi(di) - inner.powi(di));
    }
    total.powf(1.0 / q)
}

fn sample_field(grid: Arc<RadialGrid>, terms: &[DataTerm]) -> Result<RadialField> {
    let mut values = vec![0.0; grid.len()];
    for t in terms {
        for (v, frac) in values.iter_mut().zip(grid.ball_fractions(t.radius)) {
            *v += t.amplitude * frac;
        }
    }
    let field = RadialField::new(grid, values)?;
    if field.values.windows(2).any(|w| w[1] > w[0] * (1.0 + 1e-12)) {
        return Err(Error::Schedule("sampled field is not non-increasing in radius".into()));
    }
    Ok(field)
}

/// Samples the data and checks the sampled norm against the exact one.
fn finish_field(
    grid: Arc<RadialGrid>,
    terms: &[DataTerm],
    d: usize,
    q: f64,
) -> Result<(RadialField, f64, f64)> {
    let field = sample_field(grid, terms)?;
    let sampled = lq_norm(&field, q)?;
    let exact = nested_norm(terms, d, q);
    if (sampled - exact).abs() > NORM_TOLERANCE * exact {
        return Err(Error::param(
            "grid",
            format!("sampled norm {sampled:.6e} is off the exact {exact:.6e} by more than 1%"),
        ));
    }
    Ok((field, sampled, exact))
}

fn inverse_square_sum(from: usize, to: usize) -> f64 {
    (from..=to).map(|k| 1.0 / (k as f64 * k as f64)).sum()
}

fn basel_tail(n: usize) -> f64 {
    (PI * PI / 6.0 - inverse_square_sum(1, n)).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_norm_of_two_balls() {
        let terms = [
            DataTerm {
                index: 1,
                phi: 1.0,
                amplitude: 1.0,
                radius: 1.0,
            },
            DataTerm {
                index: 2,
                phi: 1.0,
                amplitude: 2.0,
                radius: 0.5,
            },
        ];
        // d = 1: level 3 on [-0.5, 0.5], level 1 on the rest of [-1, 1].
        assert!((nested_norm(&terms, 1, 1.0) - 4.0).abs() < 1e-14);
        assert!((nested_norm(&terms, 1, 2.0) - 10f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn basel_tail_shrinks() {
        assert!((basel_tail(0) - PI * PI / 6.0).abs() < 1e-15);
        assert!(basel_tail(10) < 0.1 && basel_tail(10) > 0.09);
    }
}
