use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::heatkernel::omega;

/// Finite-volume radial grid on the ball `B_R` in `R^d`.
///
/// Cells are the shells `[faces[i], faces[i+1]]`, the first starting at the
/// origin and the last ending on the Dirichlet boundary `R`. `nodes` are the
/// cell midpoints and `quad_weights` the exact shell volumes, so the weights
/// sum to `omega_d R^d`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialGrid {
    pub d: usize,
    pub radius: f64,
    pub faces: Vec<f64>,
    pub nodes: Vec<f64>,
    pub quad_weights: Vec<f64>,
}

impl RadialGrid {
    pub fn from_faces(d: usize, faces: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(Error::param("d", "dimension must be at least 1"));
        }
        if faces.len() < 2 || faces[0] != 0.0 {
            return Err(Error::param("faces", "need at least one cell starting at 0"));
        }
        if faces.windows(2).any(|w| !(w[1] > w[0])) || !faces.iter().all(|v| v.is_finite()) {
            return Err(Error::param("faces", "must be finite and strictly increasing"));
        }
        let w = omega(d);
        let di = d as i32;
        let nodes = faces.windows(2).map(|p| 0.5 * (p[0] + p[1])).collect();
        let quad_weights = faces
            .windows(2)
            .map(|p| w * (p[1].powi(di) - p[0].powi(di)))
            .collect();
        Ok(Self {
            d,
            radius: *faces.last().expect("checked"),
            faces,
            nodes,
            quad_weights,
        })
    }

    pub fn uniform(d: usize, radius: f64, cells: usize) -> Result<Self> {
        if !(radius > 0.0) || cells == 0 {
            return Err(Error::param("grid", "need R > 0 and at least one cell"));
        }
        let faces = (0..=cells).map(|i| radius * i as f64 / cells as f64).collect();
        Self::from_faces(d, faces)
    }

    /// Cells of width `h_min` at the origin growing by `growth` per cell up
    /// to `h_max`; the last cell is stretched to end exactly at `radius`.
    pub fn graded(d: usize, radius: f64, h_min: f64, growth: f64, h_max: f64) -> Result<Self> {
        if !(h_min > 0.0) || !(h_max >= h_min) || !(growth >= 1.0) || !(radius > h_min) {
            return Err(Error::param("grid", "need 0 < h_min <= h_max, growth >= 1, R > h_min"));
        }
        let mut faces = vec![0.0];
        let mut h = h_min;
        let mut x = 0.0;
        while x + h < radius {
            x += h;
            faces.push(x);
            h = (h * growth).min(h_max);
        }
        let last = faces.len() - 1;
        if radius - faces[last] < 0.5 * faces[last].min(h) && last > 0 {
            faces[last] = radius;
        } else {
            faces.push(radius);
        }
        Self::from_faces(d, faces)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Fraction of each cell's volume inside `B_r`.
    pub fn ball_fractions(&self, r: f64) -> Vec<f64> {
        let di = self.d as i32;
        self.faces
            .windows(2)
            .map(|p| {
                if r >= p[1] {
                    1.0
                } else if r <= p[0] {
                    0.0
                } else {
                    (r.powi(di) - p[0].powi(di)) / (p[1].powi(di) - p[0].powi(di))
                }
            })
            .collect()
    }

    /// Number of cells lying entirely inside `B_r`.
    pub fn cells_inside(&self, r: f64) -> usize {
        self.faces[1..].iter().take_while(|&&f| f <= r * (1.0 + 1e-12)).count()
    }
}

/// Values of a radial function, one per cell of the grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialField {
    #[serde(skip)]
    pub grid: Arc<RadialGrid>,
    pub values: Vec<f64>,
}

impl RadialField {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for {} cells",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("values", "field values must be finite"));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Arc<RadialGrid>) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![0.0; n],
        }
    }

    pub fn constant(grid: Arc<RadialGrid>, value: f64) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![value; n],
        }
    }

    /// `amplitude * chi_{B_r}`, sampled as cell volume fractions.
    pub fn ball(grid: Arc<RadialGrid>, r: f64, amplitude: f64) -> Self {
        let values = grid.ball_fractions(r).into_iter().map(|v| amplitude * v).collect();
        Self { grid, values }
    }

    pub fn from_fn(grid: Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes.iter().map(|&r| f(r)).collect();
        Self { grid, values }
    }

    pub fn is_nonneg(&self) -> bool {
        self.values.iter().all(|v| *v >= 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn snapshot(&self, t: f64) -> Snapshot {
        Snapshot {
            t,
            grid: (*self.grid).clone(),
            values: self.values.clone(),
        }
    }
}

/// Self-describing JSON export of a field.
#[derive(Debug, Clone, Serialize)]
pub struct Snapshot {
    pub t: f64,
    pub grid: RadialGrid,
    pub values: Vec<f64>,
}

/// `(sum_i w_i |u_i|^q)^{1/q}`, or `max |u_i|` for `q = inf`.
pub fn lq_norm(u: &RadialField, q: f64) -> Result<f64> {
    lq_norm_values(&u.grid, &u.values, q)
}

pub(crate) fn lq_norm_values(grid: &RadialGrid, values: &[f64], q: f64) -> Result<f64> {
    if !(q >= 1.0) {
        return Err(Error::param("q", "must be at least 1"));
    }
    if q.is_infinite() {
        return Ok(values.iter().fold(0.0, |m, v| m.max(v.abs())));
    }
    let s: f64 = grid
        .quad_weights
        .iter()
        .zip(values)
        .map(|(w, v)| w * v.abs().powf(q))
        .sum();
    Ok(s.powf(1.0 / q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn weights_sum_to_ball_volume() {
        for d in 1..=3 {
            let g = RadialGrid::graded(d, 2.0, 1e-3, 1.05, 0.05).unwrap();
            let total: f64 = g.quad_weights.iter().sum();
            assert!((total - omega(d) * 2f64.powi(d as i32)).abs() < 1e-12);
            assert!(g.nodes.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn norms_of_indicators() {
        let g = Arc::new(RadialGrid::uniform(2, 1.5, 300).unwrap());
        let one = RadialField::constant(g.clone(), 1.0);
        assert!((lq_norm(&one, 1.0).unwrap() - PI * 2.25).abs() < 1e-12);
        let chi = RadialField::ball(g.clone(), 0.5, 1.0);
        for q in [1.0, 2.0, 3.5] {
            let exact = (PI * 0.25f64).powf(1.0 / q);
            assert!((lq_norm(&chi, q).unwrap() - exact).abs() < 1e-12);
        }
        let scaled = RadialField::ball(g, 0.5, 3.0);
        assert!((lq_norm(&scaled, 2.0).unwrap() - 3.0 * lq_norm(&chi, 2.0).unwrap()).abs() < 1e-12);
        assert_eq!(lq_norm(&scaled, f64::INFINITY).unwrap(), 3.0);
    }

    #[test]
    fn partial_cell_fraction_keeps_volume() {
        let g = Arc::new(RadialGrid::uniform(3, 1.0, 7).unwrap());
        let chi = RadialField::ball(g, 0.3, 1.0);
        let vol = lq_norm(&chi, 1.0).unwrap();
        assert!((vol - omega(3) * 0.027).abs() < 1e-14);
    }
}
