//! Three-dimensional entry over a rotating planet with the radius as
//! independent variable.
//!
//! State `(λ, φ, v, γ, χ, β, ξ)`; `χ` is the heading measured from north and
//! `g_φ` the northward gravity component. Rates are `d/dr`:
//!
//! ```text
//! λ' = sin χ / (r cos φ tan γ)
//! φ' = cos χ / (r tan γ)
//! v' = −ρv/(2β sin γ) − (g_r − cos χ g_φ/tan γ)/v
//!      + rω² cos φ (cos φ − cos χ sin φ/tan γ)/v
//! γ' = αρ/(2 sin γ) − (g_r + cos χ tan γ g_φ − v²/r)/(v² tan γ)
//!      + 2ω sin χ cos φ/(v sin γ) + rω² cos φ (cos φ/tan γ + cos χ sin φ)/v²
//! χ' = sin χ tan φ/(r tan γ) + (2ω/v)(sin φ/sin γ − cos χ cos φ/cos γ)
//!      + sin χ (rω² sin φ cos φ − g_φ)/(v² sin γ cos γ)
//! β' = ξ' = 0
//! ```
//!
//! Derivatives come from forward-mode automatic differentiation of the same
//! source, so the Jacobian and divergence gradient are exact to rounding.

use serde::{Deserialize, Serialize};

use super::{Characteristics, DynamicsError, Environment, Flavor, FlowEval, VehicleParams};
use crate::real::{seed2, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SixState {
    pub lambda: f64,
    pub phi: f64,
    pub v: f64,
    pub gamma: f64,
    pub chi: f64,
    pub beta: f64,
    pub xi: f64,
}

impl SixState {
    pub fn to_array(self) -> [f64; 7] {
        [self.lambda, self.phi, self.v, self.gamma, self.chi, self.beta, self.xi]
    }

    pub fn from_slice(x: &[f64]) -> Self {
        SixState { lambda: x[0], phi: x[1], v: x[2], gamma: x[3], chi: x[4], beta: x[5], xi: x[6] }
    }
}

/// Thresholds below which `|sin γ|` and `|cos φ|` are treated as singular.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingularityGuards {
    pub eps_gamma: f64,
    pub eps_phi: f64,
}

impl Default for SingularityGuards {
    fn default() -> Self {
        SingularityGuards { eps_gamma: 1e-6, eps_phi: 1e-6 }
    }
}

/// Generic right-hand side at radius `r`.
pub fn rates<T: Real>(
    r: f64,
    x: &[T; 7],
    env: &Environment,
    veh: &VehicleParams,
    guards: &SingularityGuards,
) -> Result<[T; 7], DynamicsError> {
    let [_lambda, phi, v, gamma, chi, beta, xi] = *x;
    if !(v.value() > 0.0) {
        return Err(DynamicsError::NonPositiveVelocity { v: v.value() });
    }
    if !(xi.value() > 0.0) {
        return Err(DynamicsError::InvalidParameter("atmospheric correction must be positive"));
    }
    let (sg, cg) = (gamma.sin(), gamma.cos());
    if sg.value().abs() < guards.eps_gamma {
        return Err(DynamicsError::NearHorizontal { gamma: gamma.value() });
    }
    let (sp, cp) = (phi.sin(), phi.cos());
    if cp.value().abs() < guards.eps_phi {
        return Err(DynamicsError::NearPolar { phi: phi.value() });
    }
    let (sc, cc) = (chi.sin(), chi.cos());
    let tg = sg / cg;
    let tp = sp / cp;
    let w = env.planet.omega;
    let rho = xi * env.atmosphere.density(r - env.planet.radius)?;
    let (gr, gphi) = env.gravity.components(T::cst(r), phi);
    let v2 = v * v;
    let rw2 = r * w * w;

    let dlambda = sc / (cp * tg * r);
    let dphi = cc / (tg * r);
    let dv = -(v * rho / (beta * sg * 2.0)) - (gr - cc * gphi / tg) / v + cp * rw2 / v * (cp - cc * sp / tg);
    let dgamma = rho * veh.alpha_lift / (sg * 2.0) - (gr + cc * tg * gphi - v2 / r) / (v2 * tg)
        + sc * cp * (2.0 * w) / (v * sg)
        + cp * rw2 / v2 * (cp / tg + cc * sp);
    let dchi = sc * tp / (tg * r) + (sp / sg - cc * cp / cg) * (2.0 * w) / v
        + sc / (v2 * sg * cg) * (sp * cp * rw2 - gphi);
    Ok([dlambda, dphi, dv, dgamma, dchi, T::cst(0.0), T::cst(0.0)])
}

/// State rates `d(λ, φ, v, γ, χ, β, ξ)/dr`.
pub fn six_state_rhs(
    r: f64,
    s: &SixState,
    env: &Environment,
    veh: &VehicleParams,
    guards: &SingularityGuards,
) -> Result<SixState, DynamicsError> {
    rates(r, &s.to_array(), env, veh, guards).map(|d| SixState::from_slice(&d))
}

/// Rates, Jacobian, divergence and divergence gradient in one pass.
pub fn derivatives(
    r: f64,
    x: &[f64],
    env: &Environment,
    veh: &VehicleParams,
    guards: &SingularityGuards,
    out: &mut FlowEval,
) -> Result<(), DynamicsError> {
    let xs: [f64; 7] = core::array::from_fn(|i| x[i]);
    let f = rates(r, &seed2(&xs), env, veh, guards)?;
    let mut div = 0.0;
    for i in 0..7 {
        out.rates[i] = f[i].v.v;
        for j in 0..7 {
            out.jacobian[i * 7 + j] = f[i].d[j].v;
        }
        div += f[i].d[i].v;
    }
    out.divergence = div;
    for k in 0..7 {
        out.divergence_grad[k] = (0..7).map(|i| f[i].d[i].d[k]).sum();
    }
    Ok(())
}

/// `Σ ∂x_i'/∂x_i` at radius `r`.
pub fn six_state_divergence(
    r: f64,
    s: &SixState,
    env: &Environment,
    veh: &VehicleParams,
    guards: &SingularityGuards,
) -> Result<f64, DynamicsError> {
    let mut e = FlowEval::zeros(7);
    derivatives(r, &s.to_array(), env, veh, guards, &mut e)?;
    Ok(e.divergence)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SixStateModel {
    pub env: Environment,
    pub vehicle: VehicleParams,
    pub guards: SingularityGuards,
}

impl Characteristics for SixStateModel {
    fn flavor(&self) -> Flavor {
        Flavor::SixState
    }

    fn rates(&self, r: f64, x: &[f64], out: &mut [f64]) -> Result<(), DynamicsError> {
        let xs: [f64; 7] = core::array::from_fn(|i| x[i]);
        out[..7].copy_from_slice(&rates(r, &xs, &self.env, &self.vehicle, &self.guards)?);
        Ok(())
    }

    fn rates_full(&self, r: f64, x: &[f64], out: &mut FlowEval) -> Result<(), DynamicsError> {
        derivatives(r, x, &self.env, &self.vehicle, &self.guards, out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{atmosphere, three_state, AtmosphereModel, GravityModel, PlanetParams};
    use crate::real::fd_jacobian;
    use approx::assert_relative_eq;
    use core::f64::consts::FRAC_PI_2;

    fn mars(omega: f64, rho_scale: f64) -> Environment {
        let mut atmosphere = atmosphere::mars_fit();
        if rho_scale == 0.0 {
            atmosphere = AtmosphereModel::Exponential { rho0: 0.0, h1: 1e4, h2: 0.0 };
        }
        Environment {
            planet: PlanetParams { radius: 3397e3, mu: 4.283e13, omega, rho_sl: 0.02 },
            atmosphere,
            gravity: GravityModel::InverseSquare { mu: 4.283e13 },
        }
    }

    fn veh(alpha: f64) -> VehicleParams {
        VehicleParams { beta: 125.0, alpha_lift: alpha, cl_over_cd: 0.0 }
    }

    #[test]
    fn due_east_heading_keeps_latitude() {
        let s = SixState { lambda: 0.1, phi: 0.0, v: 5000.0, gamma: -0.3, chi: FRAC_PI_2, beta: 125.0, xi: 1.0 };
        let d = six_state_rhs(3450e3, &s, &mars(0.0, 1.0), &veh(0.0), &SingularityGuards::default()).unwrap();
        assert!(d.phi.abs() < 1e-20);
        assert_eq!((d.beta, d.xi), (0.0, 0.0));
    }

    #[test]
    fn vertical_vacuum_descent_is_energy_equation() {
        let s = SixState { lambda: 0.0, phi: 0.2, v: 3000.0, gamma: -FRAC_PI_2, chi: 0.3, beta: 125.0, xi: 1.0 };
        let r = 3450e3;
        let d = six_state_rhs(r, &s, &mars(0.0, 0.0), &veh(0.0), &SingularityGuards::default()).unwrap();
        assert_relative_eq!(d.v, -4.283e13 / (r * r) / 3000.0, max_relative = 1e-12);
    }

    #[test]
    fn reduces_to_planar_model_without_rotation() {
        let e = mars(0.0, 1.0);
        let v = veh(0.0);
        let r = 3397e3 + 60e3;
        let s = SixState { lambda: 0.0, phi: 0.0, v: 4000.0, gamma: -0.4, chi: FRAC_PI_2, beta: 125.0, xi: 1.05 };
        let d = six_state_rhs(r, &s, &e, &v, &SingularityGuards::default()).unwrap();
        let p = three_state::three_state_rhs(
            &three_state::ThreeState { r, v: s.v, gamma: s.gamma, beta: s.beta, xi: s.xi },
            &e,
            &v,
        )
        .unwrap();
        assert_relative_eq!(d.v, p.v / p.r, max_relative = 1e-13);
        assert_relative_eq!(d.gamma, p.gamma / p.r, max_relative = 1e-12);
    }

    #[test]
    fn guards_trip_near_singularities() {
        let g = SingularityGuards::default();
        let s = SixState { lambda: 0.0, phi: 0.0, v: 4000.0, gamma: 1e-8, chi: 0.0, beta: 125.0, xi: 1.0 };
        assert!(matches!(six_state_rhs(3.45e6, &s, &mars(0.0, 1.0), &veh(0.0), &g), Err(DynamicsError::NearHorizontal { .. })));
        let s = SixState { phi: FRAC_PI_2, gamma: -0.3, ..s };
        assert!(matches!(six_state_rhs(3.45e6, &s, &mars(0.0, 1.0), &veh(0.0), &g), Err(DynamicsError::NearPolar { .. })));
    }

    #[test]
    fn table3_mean_state_matches_term_by_term_oracle() {
        let e = mars(7.095e-5, 1.0);
        let v = veh(0.001);
        let r = 3397e3 + 126e3;
        let s = SixState {
            lambda: (-90.07f64).to_radians(),
            phi: (-43.9f64).to_radians(),
            v: 5505.0,
            gamma: (-14.15f64).to_radians(),
            chi: 4.99f64.to_radians(),
            beta: 125.0,
            xi: 1.0,
        };
        let d = six_state_rhs(r, &s, &e, &v, &SingularityGuards::default()).unwrap();
        let h = 126e3;
        let c = atmosphere::MARS_DENSITY_FIT;
        let rho = (c[0] + c[1] * h + c[2] * h * h + c[3] * h.powi(3) + c[4] * h.powi(4)).exp();
        let g = 4.283e13 / (r * r);
        let w = 7.095e-5;
        let (sg, cg, tg) = (s.gamma.sin(), s.gamma.cos(), s.gamma.tan());
        let (sp, cp) = (s.phi.sin(), s.phi.cos());
        let (sc, cc) = (s.chi.sin(), s.chi.cos());
        let vv = s.v;
        let dv = -vv * rho / (2.0 * 125.0 * sg) - g / vv + r * w * w * cp / vv * (cp - cc * sp / tg);
        let dg = 0.001 * rho / (2.0 * sg) - (g - vv * vv / r) / (vv * vv * tg)
            + 2.0 * w * sc * cp / (vv * sg)
            + r * w * w * cp / (vv * vv) * (cp / tg + cc * sp);
        let dc = sc * sp / cp / (r * tg) + 2.0 * w / vv * (sp / sg - cc * cp / cg)
            + sc / (vv * vv * sg * cg) * (r * w * w * sp * cp);
        assert_relative_eq!(d.lambda, sc / (r * cp * tg), max_relative = 1e-13);
        assert_relative_eq!(d.phi, cc / (r * tg), max_relative = 1e-13);
        assert_relative_eq!(d.v, dv, max_relative = 1e-12);
        assert_relative_eq!(d.gamma, dg, max_relative = 1e-11);
        assert_relative_eq!(d.chi, dc, max_relative = 1e-11);
    }

    #[test]
    fn divergence_matches_finite_difference_trace() {
        let e = Environment {
            planet: PlanetParams { radius: 6378.1e3, mu: 3.986e14, omega: 7.2921e-5, rho_sl: 1.225 },
            atmosphere: AtmosphereModel::Exponential { rho0: 1.225, h1: 7200.0, h2: 0.0 },
            gravity: GravityModel::J2 { mu: 3.986e14, j2: crate::dynamics::gravity::EARTH_J2, rp: 6378.1e3 },
        };
        let v = veh(0.002);
        let g = SingularityGuards::default();
        let r = 6378.1e3 + 50e3;
        let x = [0.01, 0.2, 6500.0, -0.5, 0.8, 10000.0, 1.02];
        let mut out = FlowEval::zeros(7);
        derivatives(r, &x, &e, &v, &g, &mut out).unwrap();
        let fd = fd_jacobian(
            |y, o| o.copy_from_slice(&rates(r, &core::array::from_fn(|i| y[i]), &e, &v, &g).unwrap()),
            &x,
            7,
            1e-7,
        );
        let tr: f64 = (0..7).map(|i| fd[i * 8]).sum();
        assert_relative_eq!(out.divergence, tr, max_relative = 1e-6);
        assert_eq!(out.jacobian[5 * 7 + 5], 0.0);
        assert_eq!(out.jacobian[6 * 7 + 6], 0.0);
        let plain = rates(r, &x, &e, &v, &g).unwrap();
        assert_eq!(&out.rates[..], &plain[..]);
    }
}
