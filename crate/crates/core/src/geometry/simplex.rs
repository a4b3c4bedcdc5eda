//! Volume, circumradius and barycentric coordinates of a single simplex, and
//! the per-axis affine scaling applied before triangulating.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::GeometryError;
use crate::linalg;

/// `|det[v_i − v_0]| / d!` for `d + 1` vertices in `d` dimensions.
pub fn simplex_volume(vertices: &[&[f64]]) -> f64 {
    let d = vertices.len() - 1;
    if d == 0 {
        return 1.0;
    }
    let mut m = alloc::vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            m[i * d + j] = vertices[i + 1][j] - vertices[0][j];
        }
    }
    libm::fabs(linalg::det(&m, d)) / linalg::factorial(d)
}

/// Circumradius from the inverse Cayley–Menger matrix,
/// `R = sqrt(−(CM⁻¹)₀₀ / 2)`.
pub fn circumradius(vertices: &[&[f64]]) -> Result<f64, GeometryError> {
    let n = vertices.len();
    let m = n + 1;
    let mut cm = alloc::vec![0.0; m * m];
    for i in 1..m {
        cm[i] = 1.0;
        cm[i * m] = 1.0;
        for j in 1..m {
            if i != j {
                cm[i * m + j] = vertices[i - 1].iter().zip(vertices[j - 1]).map(|(a, b)| (a - b) * (a - b)).sum();
            }
        }
    }
    let mut rhs = alloc::vec![0.0; m];
    rhs[0] = 1.0;
    linalg::solve(&mut cm, m, &mut rhs).map_err(|_| GeometryError::DegenerateSimplex)?;
    let r2 = -rhs[0] / 2.0;
    if !(r2 > 0.0) || !r2.is_finite() {
        return Err(GeometryError::DegenerateSimplex);
    }
    Ok(libm::sqrt(r2))
}

/// Barycentric coordinates of `x` in the simplex.
pub fn barycentric(vertices: &[&[f64]], x: &[f64]) -> Result<Vec<f64>, GeometryError> {
    let d = vertices.len() - 1;
    let mut m = alloc::vec![0.0; d * d];
    let mut b: Vec<f64> = (0..d).map(|j| x[j] - vertices[0][j]).collect();
    // Columns are the edge vectors v_i − v_0.
    for i in 0..d {
        for j in 0..d {
            m[j * d + i] = vertices[i + 1][j] - vertices[0][j];
        }
    }
    linalg::solve(&mut m, d, &mut b).map_err(|_| GeometryError::DegenerateSimplex)?;
    let mut lam = Vec::with_capacity(d + 1);
    lam.push(1.0 - b.iter().sum::<f64>());
    lam.extend_from_slice(&b);
    Ok(lam)
}

/// Per-axis map `x ↦ (x − lo) / width` onto `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisScaling {
    pub lo: Vec<f64>,
    pub width: Vec<f64>,
}

impl AxisScaling {
    /// Fit to the bounding box of flat `points` (stride `d`). Zero-width axes
    /// keep unit width.
    pub fn fit(points: &[f64], d: usize) -> Self {
        let mut lo = alloc::vec![f64::INFINITY; d];
        let mut hi = alloc::vec![f64::NEG_INFINITY; d];
        for p in points.chunks_exact(d) {
            for j in 0..d {
                lo[j] = lo[j].min(p[j]);
                hi[j] = hi[j].max(p[j]);
            }
        }
        let width = (0..d).map(|j| if hi[j] > lo[j] { hi[j] - lo[j] } else { 1.0 }).collect();
        AxisScaling { lo, width }
    }

    pub fn identity(d: usize) -> Self {
        AxisScaling { lo: alloc::vec![0.0; d], width: alloc::vec![1.0; d] }
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        for j in 0..self.lo.len() {
            out[j] = (x[j] - self.lo[j]) / self.width[j];
        }
    }

    pub fn apply_all(&self, points: &[f64]) -> Vec<f64> {
        let d = self.lo.len();
        let mut out = alloc::vec![0.0; points.len()];
        for (p, o) in points.chunks_exact(d).zip(out.chunks_exact_mut(d)) {
            self.apply(p, o);
        }
        out
    }

    /// Physical volume of a unit of scaled volume.
    pub fn volume_factor(&self) -> f64 {
        self.width.iter().product()
    }

    /// Chain rule for gradients: `∂f/∂u_j = ∂f/∂x_j · width_j`.
    pub fn gradient_to_scaled(&self, g: &[f64], out: &mut [f64]) {
        for j in 0..self.lo.len() {
            out[j] = g[j] * self.width[j];
        }
    }
}
