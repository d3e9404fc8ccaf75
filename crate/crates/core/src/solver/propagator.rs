use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use super::grid::{RadialField, RadialGrid};
use crate::error::{Error, Result};
use crate::heatkernel::sphere_area;

/// Fewest cells accepted by [`build_propagator`].
pub const MIN_CELLS: usize = 32;
/// Negative values down to this level are clamped to zero and counted.
pub const CLAMP_FLOOR: f64 = 1e-9;

/// `S(t) = exp(-tA)` for the finite-volume Dirichlet Laplacian on a radial
/// grid, stored as the eigendecomposition of the symmetrised matrix
/// `W^{-1/2} K W^{-1/2}`.
#[derive(Debug, Clone)]
pub struct HeatPropagator {
    grid: Arc<RadialGrid>,
    eigenvalues: Vec<f64>,
    /// Columns are orthonormal eigenvectors in the symmetrised basis.
    vectors: DMatrix<f64>,
    sqrt_w: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ClampStats {
    /// Values in `[-1e-9, -roundoff)` set to zero.
    pub clamped: usize,
    /// Values below `-1e-9`, left untouched.
    pub negative: usize,
    pub min_value: f64,
}

impl ClampStats {
    pub fn merge(&mut self, other: ClampStats) {
        self.clamped += other.clamped;
        self.negative += other.negative;
        self.min_value = self.min_value.min(other.min_value);
    }
}

pub fn build_propagator(grid: Arc<RadialGrid>) -> Result<HeatPropagator> {
    let n = grid.len();
    if n < MIN_CELLS {
        return Err(Error::param("grid", format!("need at least {MIN_CELLS} cells, got {n}")));
    }
    let area = sphere_area(grid.d);
    let di = grid.d as i32 - 1;
    // Face conductances: interior faces between neighbouring centres, the
    // outer face against a zero ghost on the boundary.
    let mut cond = Vec::with_capacity(n);
    for i in 1..n {
        let face = grid.faces[i];
        cond.push(area * face.powi(di) / (grid.nodes[i] - grid.nodes[i - 1]));
    }
    let boundary = area * grid.radius.powi(di) / (grid.radius - grid.nodes[n - 1]);

    let sqrt_w: Vec<f64> = grid.quad_weights.iter().map(|w| w.sqrt()).collect();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let mut diag = 0.0;
        if i > 0 {
            diag += cond[i - 1];
        }
        if i + 1 < n {
            diag += cond[i];
            let off = -cond[i] / (sqrt_w[i] * sqrt_w[i + 1]);
            m[(i, i + 1)] = off;
            m[(i + 1, i)] = off;
        } else {
            diag += boundary;
        }
        m[(i, i)] = diag / grid.quad_weights[i];
    }
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::Eigen("non-finite matrix entry".into()));
    }

    let eig = SymmetricEigen::try_new(m, f64::EPSILON, 0)
        .ok_or_else(|| Error::Eigen("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&j| eig.eigenvalues[j]).collect();
    if !(eigenvalues[0] > 0.0) {
        return Err(Error::Eigen(format!("non-positive eigenvalue {:e}", eigenvalues[0])));
    }
    let vectors = DMatrix::from_fn(n, n, |i, k| eig.eigenvectors[(i, order[k])]);
    Ok(HeatPropagator {
        grid,
        eigenvalues,
        vectors,
        sqrt_w,
    })
}

impl HeatPropagator {
    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Eigenfunction `j` (ascending eigenvalue), normalised in the weighted norm.
    pub fn eigenfunction(&self, j: usize) -> RadialField {
        let values = (0..self.len())
            .map(|i| self.vectors[(i, j)] / self.sqrt_w[i])
            .collect();
        RadialField {
            grid: self.grid.clone(),
            values,
        }
    }

    pub(crate) fn check(&self, u: &RadialField) -> Result<()> {
        if Arc::ptr_eq(&u.grid, &self.grid) || *u.grid == *self.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch("field is not on the propagator's grid".into()))
        }
    }

    /// Modal coefficients `V^T W^{1/2} u`.
    pub(crate) fn to_modal(&self, values: &[f64]) -> Vec<f64> {
        let n = self.len();
        let y: Vec<f64> = values.iter().zip(&self.sqrt_w).map(|(v, s)| v * s).collect();
        let mut c = vec![0.0; n];
        for (k, ck) in c.iter_mut().enumerate() {
            let col = self.vectors.column(k);
            *ck = col.iter().zip(&y).map(|(a, b)| a * b).sum();
        }
        c
    }

    /// Nodal values `W^{-1/2} V c`, without any clamping.
    pub(crate) fn from_modal(&self, c: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut out = vec![0.0; n];
        for (k, &ck) in c.iter().enumerate() {
            if ck == 0.0 {
                continue;
            }
            let col = self.vectors.column(k);
            for (o, v) in out.iter_mut().zip(col.iter()) {
                *o += ck * v;
            }
        }
        for (o, s) in out.iter_mut().zip(&self.sqrt_w) {
            *o /= s;
        }
        out
    }

    pub(crate) fn decay(&self, t: f64, c: &mut [f64]) {
        for (ck, l) in c.iter_mut().zip(&self.eigenvalues) {
            *ck *= (-l * t).exp();
        }
    }

    /// Removes eigensolver roundoff below zero. `scale` is the weighted
    /// 2-norm the values were computed from.
    pub(crate) fn clamp(&self, values: &mut [f64], scale: f64) -> ClampStats {
        let n = self.len() as f64;
        let mut stats = ClampStats {
            min_value: values.iter().cloned().fold(f64::INFINITY, f64::min),
            ..ClampStats::default()
        };
        for (v, s) in values.iter_mut().zip(&self.sqrt_w) {
            if *v >= 0.0 {
                continue;
            }
            let roundoff = 8.0 * n * f64::EPSILON * scale / s;
            if *v >= -roundoff {
                *v = 0.0;
            } else if *v >= -CLAMP_FLOOR {
                *v = 0.0;
                stats.clamped += 1;
            } else {
                stats.negative += 1;
            }
        }
        stats
    }

    /// Applies `S(t)` to raw nodal values.
    pub(crate) fn apply_values(&self, t: f64, values: &[f64]) -> (Vec<f64>, ClampStats) {
        let mut c = self.to_modal(values);
        let scale = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.decay(t, &mut c);
        let mut out = self.from_modal(&c);
        let stats = self.clamp(&mut out, scale);
        (out, stats)
    }
}

/// `S(t) u` with the clamp statistics of the result.
pub fn semigroup_apply(p: &HeatPropagator, t: f64, u: &RadialField) -> Result<(RadialField, ClampStats)> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::param("t", "time must be non-negative"));
    }
    p.check(u)?;
    if t == 0.0 {
        return Ok((u.clone(), ClampStats::default()));
    }
    let (values, stats) = p.apply_values(t, &u.values);
    Ok((
        RadialField {
            grid: p.grid.clone(),
            values,
        },
        stats,
    ))
}
