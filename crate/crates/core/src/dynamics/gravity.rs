//! Gravity field models.

use serde::{Deserialize, Serialize};

use crate::real::Real;

/// Standard Earth second zonal harmonic.
pub const EARTH_J2: f64 = 1.08263e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GravityModel {
    InverseSquare { mu: f64 },
    /// Axisymmetric field truncated after the `J2` term.
    J2 { mu: f64, j2: f64, rp: f64 },
}

impl GravityModel {
    pub fn mu(&self) -> f64 {
        match *self {
            GravityModel::InverseSquare { mu } | GravityModel::J2 { mu, .. } => mu,
        }
    }

    /// Radial (inward) and northward components at radius `r`, latitude `φ`.
    pub fn components<T: Real>(&self, r: T, phi: T) -> (T, T) {
        match *self {
            GravityModel::InverseSquare { mu } => (r.powi(2).recip() * mu, T::cst(0.0)),
            GravityModel::J2 { mu, j2, rp } => {
                let g0 = r.powi(2).recip() * mu;
                let k = (r.recip() * rp).powi(2) * j2;
                let s = phi.sin();
                let gr = g0 * (T::cst(1.0) - k * 1.5 * (s * s * 3.0 - 1.0));
                let gphi = -(g0 * k * s * phi.cos() * 3.0);
                (gr, gphi)
            }
        }
    }

    /// Magnitude used by the planar (equatorial) model.
    pub fn planar<T: Real>(&self, r: T) -> T {
        self.components(r, T::cst(0.0)).0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn inverse_square_times_r2_is_mu() {
        let g = GravityModel::InverseSquare { mu: 3.986e14 };
        for r in [6.4e6, 7.0e6, 1.0e7] {
            assert_relative_eq!(g.planar(r) * r * r, 3.986e14, max_relative = 1e-12);
        }
    }

    #[test]
    fn j2_reduces_to_inverse_square() {
        let g = GravityModel::J2 { mu: 3.986e14, j2: 0.0, rp: 6.378e6 };
        let (gr, gphi) = g.components(6.5e6, 0.4);
        assert_relative_eq!(gr, 3.986e14 / 6.5e6f64.powi(2), max_relative = 1e-15);
        assert_eq!(gphi, 0.0);
    }

    #[test]
    fn j2_components_are_gradient_of_potential() {
        // U = μ/r [1 − J2/2 (Rp/r)² (3 sin²φ − 1)]; g_r = −∂U/∂r, g_φ = (1/r) ∂U/∂φ
        let (mu, j2, rp) = (3.986e14, EARTH_J2, 6.3781e6);
        let u = |r: f64, p: f64| mu / r * (1.0 - j2 / 2.0 * (rp / r).powi(2) * (3.0 * p.sin().powi(2) - 1.0));
        let g = GravityModel::J2 { mu, j2, rp };
        let (r, p) = (6.6e6, 0.6);
        let (gr, gphi) = g.components(r, p);
        let h = 1.0;
        assert_relative_eq!(gr, -(u(r + h, p) - u(r - h, p)) / (2.0 * h), max_relative = 1e-8);
        let dp = 1e-6;
        assert_relative_eq!(gphi, (u(r, p + dp) - u(r, p - dp)) / (2.0 * dp) / r, max_relative = 1e-6);
    }
}
