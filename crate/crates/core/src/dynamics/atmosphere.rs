//! Atmospheric density models.

use alloc::vec::Vec;
use core::sync::atomic::{AtomicBool, Ordering};

use serde::{Deserialize, Serialize};

use super::DynamicsError;
use crate::linalg::Singular;
use crate::real::{Jet, Real};

/// Density, its altitude derivative and its derivative with respect to the
/// multiplicative correction `ξ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensitySample {
    pub rho: f64,
    pub drho_dh: f64,
    pub drho_dxi: f64,
}

/// Nominal density as a function of altitude above the reference radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AtmosphereModel {
    /// `ρ(h) = ρ0·exp((H2 − h)/H1)`.
    Exponential { rho0: f64, h1: f64, h2: f64 },
    /// C² cubic spline through `ln ρ` on an altitude grid.
    TabulatedSmooth(LogSpline),
    /// `ρ(h) = exp(c0 + c1 h + c2 h² + c3 h³ + c4 h⁴)`, clamped outside
    /// `[h_min, h_max]`.
    PolynomialExp { c: [f64; 5], h_min: f64, h_max: f64 },
}

static CLAMP_WARNED: AtomicBool = AtomicBool::new(false);

impl AtmosphereModel {
    /// Altitude interval on which the model is defined without clamping.
    pub fn validity(&self) -> (f64, f64) {
        match self {
            AtmosphereModel::Exponential { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            AtmosphereModel::TabulatedSmooth(s) => s.range(),
            AtmosphereModel::PolynomialExp { h_min, h_max, .. } => (*h_min, *h_max),
        }
    }

    /// Nominal density `ρ_model(h)`.
    pub fn density<T: Real>(&self, h: T) -> Result<T, DynamicsError> {
        match self {
            AtmosphereModel::Exponential { rho0, h1, h2 } => {
                Ok(((-h + *h2) / *h1).exp() * *rho0)
            }
            AtmosphereModel::TabulatedSmooth(s) => s.eval(h).map(Real::exp),
            AtmosphereModel::PolynomialExp { c, h_min, h_max } => {
                let hv = h.value();
                let hc = if hv < *h_min || hv > *h_max {
                    if !CLAMP_WARNED.swap(true, Ordering::Relaxed) {
                        log::warn!(
                            "altitude {hv} m outside density fit range [{h_min}, {h_max}] m; clamping"
                        );
                    }
                    T::cst(hv.clamp(*h_min, *h_max))
                } else {
                    h
                };
                let p = (((hc * c[4] + c[3]) * hc + c[2]) * hc + c[1]) * hc + c[0];
                Ok(p.exp())
            }
        }
    }

    /// `(ρ, ∂ρ/∂h, ∂ρ/∂ξ)` for the corrected density `ξ·ρ_model(h)`.
    pub fn evaluate(&self, h: f64, xi: f64) -> Result<DensitySample, DynamicsError> {
        if !(xi > 0.0) {
            return Err(DynamicsError::InvalidParameter("atmospheric correction must be positive"));
        }
        let (lo, hi) = self.validity();
        if let AtmosphereModel::TabulatedSmooth(_) = self {
            if h < lo || h > hi {
                return Err(DynamicsError::AltitudeOutOfRange { altitude: h, min: lo, max: hi });
            }
        }
        let j = self.density(Jet::<f64, 1>::variable(h, 0))?;
        Ok(DensitySample { rho: xi * j.v, drho_dh: xi * j.d[0], drho_dxi: j.v })
    }
}

/// Natural cubic spline, stored per interval as polynomial coefficients in
/// the local offset `t = h − h_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogSpline {
    knots: Vec<f64>,
    coeffs: Vec<[f64; 4]>,
}

impl LogSpline {
    /// Fit through `(altitude, density)` pairs. Altitudes must be strictly
    /// increasing and densities positive.
    pub fn from_density_table(alt: &[f64], rho: &[f64]) -> Result<Self, DynamicsError> {
        if alt.len() != rho.len() || alt.len() < 3 {
            return Err(DynamicsError::InvalidParameter("density table needs at least 3 matching rows"));
        }
        if alt.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(DynamicsError::InvalidParameter("density table altitudes must increase"));
        }
        if rho.iter().any(|&r| !(r > 0.0) || !r.is_finite()) {
            return Err(DynamicsError::InvalidParameter("density table values must be positive"));
        }
        let y: Vec<f64> = rho.iter().map(|&r| libm::log(r)).collect();
        let m = natural_second_derivatives(alt, &y)
            .map_err(|Singular| DynamicsError::InvalidParameter("density table spline is singular"))?;
        let coeffs = (0..alt.len() - 1)
            .map(|k| {
                let dx = alt[k + 1] - alt[k];
                let b = (y[k + 1] - y[k]) / dx - dx * (2.0 * m[k] + m[k + 1]) / 6.0;
                [y[k], b, m[k] / 2.0, (m[k + 1] - m[k]) / (6.0 * dx)]
            })
            .collect();
        Ok(LogSpline { knots: alt.to_vec(), coeffs })
    }

    pub fn range(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Spline value `ln ρ(h)`.
    pub fn eval<T: Real>(&self, h: T) -> Result<T, DynamicsError> {
        let hv = h.value();
        let (lo, hi) = self.range();
        if !(hv >= lo && hv <= hi) {
            return Err(DynamicsError::AltitudeOutOfRange { altitude: hv, min: lo, max: hi });
        }
        let k = self.knots.partition_point(|&x| x <= hv).clamp(1, self.coeffs.len()) - 1;
        let t = h - self.knots[k];
        let c = &self.coeffs[k];
        Ok(((t * c[3] + c[2]) * t + c[1]) * t + c[0])
    }
}

/// Second derivatives of the natural cubic spline (tridiagonal solve).
fn natural_second_derivatives(x: &[f64], y: &[f64]) -> Result<Vec<f64>, Singular> {
    let n = x.len();
    let mut m = alloc::vec![0.0; n];
    if n < 3 {
        return Ok(m);
    }
    let mut diag = alloc::vec![0.0; n - 2];
    let mut rhs = alloc::vec![0.0; n - 2];
    let mut upper = alloc::vec![0.0; n - 2];
    for i in 1..n - 1 {
        let h0 = x[i] - x[i - 1];
        let h1 = x[i + 1] - x[i];
        diag[i - 1] = 2.0 * (h0 + h1);
        upper[i - 1] = h1;
        rhs[i - 1] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
    }
    // Thomas algorithm; the sub-diagonal entry of row i is h_{i-1}.
    for i in 1..n - 2 {
        let lower = x[i + 1] - x[i];
        let w = lower / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    for i in (0..n - 2).rev() {
        if diag[i] == 0.0 {
            return Err(Singular);
        }
        let next = if i + 1 < n - 2 { m[i + 2] } else { 0.0 };
        m[i + 1] = (rhs[i] - upper[i] * next) / diag[i];
    }
    Ok(m)
}

/// Parse a two-column `altitude_m,density_kg_m3` table with a header row.
pub fn parse_density_csv(text: &str) -> Result<(Vec<f64>, Vec<f64>), DynamicsError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or(DynamicsError::InvalidParameter("empty density table"))?;
    if header.split(',').next().map(str::trim).and_then(|s| s.parse::<f64>().ok()).is_some() {
        return Err(DynamicsError::InvalidParameter("density table needs a header row"));
    }
    let mut alt = Vec::new();
    let mut rho = Vec::new();
    for line in lines {
        let mut cols = line.split(',').map(str::trim);
        let a = cols.next().and_then(|s| s.parse::<f64>().ok());
        let r = cols.next().and_then(|s| s.parse::<f64>().ok());
        match (a, r) {
            (Some(a), Some(r)) => {
                alt.push(a);
                rho.push(r);
            }
            _ => return Err(DynamicsError::InvalidParameter("malformed density table row")),
        }
    }
    Ok((alt, rho))
}

/// US Standard Atmosphere 1976 density, 0–1000 km at 1 km spacing.
pub const US76_TABLE_CSV: &str = include_str!("../../data/us76_density.csv");

/// Spline through the shipped US76 table.
pub fn us76() -> AtmosphereModel {
    let (alt, rho) = parse_density_csv(US76_TABLE_CSV).expect("shipped US76 table parses");
    AtmosphereModel::TabulatedSmooth(LogSpline::from_density_table(&alt, &rho).expect("shipped US76 table is valid"))
}

/// Mars density fit coefficients for altitude in metres.
pub const MARS_DENSITY_FIT: [f64; 5] = [-4.343, -9.204e-5, -1.936e-11, -7.507e-15, 4.195e-20];

pub fn mars_fit() -> AtmosphereModel {
    AtmosphereModel::PolynomialExp { c: MARS_DENSITY_FIT, h_min: 0.0, h_max: 130e3 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exponential_anchor_values() {
        let m = AtmosphereModel::Exponential { rho0: 1.215, h1: 8300.0, h2: 0.0 };
        assert_eq!(m.evaluate(0.0, 1.0).unwrap().rho, 1.215);
        assert_relative_eq!(m.evaluate(8300.0, 1.0).unwrap().rho, 1.215 * (-1.0f64).exp(), max_relative = 1e-15);
        let s = m.evaluate(1000.0, 1.1).unwrap();
        assert_relative_eq!(s.drho_dxi * 1.1, s.rho, max_relative = 1e-15);
        assert_relative_eq!(s.drho_dh, -s.rho / 8300.0, max_relative = 1e-14);
    }

    #[test]
    fn mars_fit_at_zero_is_exp_c0() {
        let m = mars_fit();
        assert_relative_eq!(m.evaluate(0.0, 1.0).unwrap().rho, (-4.343f64).exp(), max_relative = 1e-15);
        // clamped above the fit range
        let top = m.evaluate(130e3, 1.0).unwrap().rho;
        let s = m.evaluate(140e3, 1.0).unwrap();
        assert_eq!(s.rho, top);
        assert_eq!(s.drho_dh, 0.0);
    }

    #[test]
    fn spline_reproduces_exponential_table() {
        let alt: Vec<f64> = (0..=50).map(|k| k as f64 * 1000.0).collect();
        let rho: Vec<f64> = alt.iter().map(|h| 1.2 * (-h / 7000.0f64).exp()).collect();
        let s = LogSpline::from_density_table(&alt, &rho).unwrap();
        let m = AtmosphereModel::TabulatedSmooth(s);
        for h in [0.0, 500.0, 12_345.0, 49_999.0, 50_000.0] {
            let e = m.evaluate(h, 1.0).unwrap();
            let exact = 1.2 * (-h / 7000.0f64).exp();
            assert_relative_eq!(e.rho, exact, max_relative = 1e-12);
            assert_relative_eq!(e.drho_dh, -exact / 7000.0, max_relative = 1e-9);
        }
        assert!(matches!(
            m.evaluate(-1.0, 1.0),
            Err(DynamicsError::AltitudeOutOfRange { .. })
        ));
    }

    #[test]
    fn spline_derivative_matches_central_difference_at_knots() {
        let m = us76();
        for k in 1..999 {
            let h = k as f64 * 1000.0;
            let d = m.evaluate(h, 1.0).unwrap().drho_dh;
            let step = 1.0;
            let fd = (m.evaluate(h + step, 1.0).unwrap().rho - m.evaluate(h - step, 1.0).unwrap().rho) / (2.0 * step);
            assert_relative_eq!(d, fd, max_relative = 1e-6);
        }
    }

    #[test]
    fn csv_header_required() {
        assert!(parse_density_csv("0,1.2\n1,1.1\n").is_err());
        let (a, r) = parse_density_csv("altitude_m,density_kg_m3\n0,1.2\n1000,1.1\n").unwrap();
        assert_eq!(a, [0.0, 1000.0]);
        assert_eq!(r, [1.2, 1.1]);
    }
}
