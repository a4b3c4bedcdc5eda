//! Planar entry over a non-rotating planet, time as independent variable.
//!
//! State `(r, v, γ, β, ξ)`:
//!
//! ```text
//! ṙ = v sin γ
//! v̇ = −ρ v²/(2β) − g sin γ
//! γ̇ = (v/r − g/v) cos γ + (C_L/C_D) ρ v/(2β)
//! β̇ = ξ̇ = 0
//! ```
//!
//! with `ρ = ξ·ρ_model(r − R_p)`. The divergence of this field is
//! `−ρv/β − sin γ (v/r − g/v)`.

use serde::{Deserialize, Serialize};

use super::{Characteristics, DynamicsError, Environment, Flavor, FlowEval, VehicleParams};
use crate::real::{Jet, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThreeState {
    pub r: f64,
    pub v: f64,
    pub gamma: f64,
    pub beta: f64,
    pub xi: f64,
}

impl ThreeState {
    pub fn to_array(self) -> [f64; 5] {
        [self.r, self.v, self.gamma, self.beta, self.xi]
    }

    pub fn from_slice(x: &[f64]) -> Self {
        ThreeState { r: x[0], v: x[1], gamma: x[2], beta: x[3], xi: x[4] }
    }
}

/// Generic right-hand side; shared by plain and differentiated evaluation.
pub fn rates<T: Real>(x: &[T; 5], env: &Environment, veh: &VehicleParams) -> Result<[T; 5], DynamicsError> {
    let [r, v, gamma, beta, xi] = *x;
    check(r.value(), v.value(), xi.value())?;
    let rho = env.atmosphere.density(r - env.planet.radius)? * xi;
    let g = env.gravity.planar(r);
    let (s, c) = (gamma.sin(), gamma.cos());
    let rv = rho * v / (beta * 2.0);
    Ok([
        v * s,
        -(rv * v) - g * s,
        (v / r - g / v) * c + rv * veh.cl_over_cd,
        T::cst(0.0),
        T::cst(0.0),
    ])
}

fn check(r: f64, v: f64, xi: f64) -> Result<(), DynamicsError> {
    if !(v > 0.0) {
        return Err(DynamicsError::NonPositiveVelocity { v });
    }
    if !(r > 0.0) {
        return Err(DynamicsError::NonPositiveRadius { r });
    }
    if !(xi > 0.0) {
        return Err(DynamicsError::InvalidParameter("atmospheric correction must be positive"));
    }
    Ok(())
}

/// State rates `d(r, v, γ, β, ξ)/dt`.
pub fn three_state_rhs(s: &ThreeState, env: &Environment, veh: &VehicleParams) -> Result<ThreeState, DynamicsError> {
    rates(&s.to_array(), env, veh).map(|d| ThreeState::from_slice(&d))
}

/// Closed-form Jacobian, divergence and divergence gradient.
pub fn derivatives(x: &[f64], env: &Environment, veh: &VehicleParams, out: &mut FlowEval) -> Result<(), DynamicsError> {
    let (r, v, gamma, beta, xi) = (x[0], x[1], x[2], x[3], x[4]);
    check(r, v, xi)?;
    let atm = env.atmosphere.density(Jet::<f64, 1>::variable(r - env.planet.radius, 0))?;
    let (rm, drm) = (atm.v, atm.d[0]);
    let gj = env.gravity.planar(Jet::<f64, 1>::variable(r, 0));
    let (g, dg) = (gj.v, gj.d[0]);
    let (s, c) = (gamma.sin(), gamma.cos());
    let k = veh.cl_over_cd;
    let rho = xi * rm;
    let q = v / r - g / v;

    out.rates[0] = v * s;
    out.rates[1] = -(rho * v / (beta * 2.0) * v) - g * s;
    out.rates[2] = q * c + rho * v / (beta * 2.0) * k;
    out.rates[3] = 0.0;
    out.rates[4] = 0.0;

    let j = &mut out.jacobian;
    j.iter_mut().for_each(|e| *e = 0.0);
    // ṙ
    j[1] = s;
    j[2] = v * c;
    // v̇
    j[5] = -xi * drm * v * v / (2.0 * beta) - dg * s;
    j[6] = -rho * v / beta;
    j[7] = -g * c;
    j[8] = rho * v * v / (2.0 * beta * beta);
    j[9] = -rm * v * v / (2.0 * beta);
    // γ̇
    let dq_dr = -v / (r * r) - dg / v;
    let dq_dv = 1.0 / r + g / (v * v);
    j[10] = dq_dr * c + k * xi * drm * v / (2.0 * beta);
    j[11] = dq_dv * c + k * rho / (2.0 * beta);
    j[12] = -q * s;
    j[13] = -k * rho * v / (2.0 * beta * beta);
    j[14] = k * rm * v / (2.0 * beta);

    out.divergence = -rho * v / beta - s * q;
    let gd = &mut out.divergence_grad;
    gd[0] = -xi * drm * v / beta - s * dq_dr;
    gd[1] = -rho / beta - s * dq_dv;
    gd[2] = -c * q;
    gd[3] = rho * v / (beta * beta);
    gd[4] = -rm * v / beta;
    Ok(())
}

/// `dn/dt = −(∇·f)·n`.
pub fn three_state_density_rate(
    s: &ThreeState,
    n: f64,
    env: &Environment,
    veh: &VehicleParams,
) -> Result<f64, DynamicsError> {
    let mut e = FlowEval::zeros(5);
    derivatives(&s.to_array(), env, veh, &mut e)?;
    if n == 0.0 {
        return Ok(0.0);
    }
    Ok(-e.divergence * n)
}

/// Partial derivatives of the density rate with respect to each state
/// component at fixed `n`: `−∂(∇·f)/∂x · n`.
pub fn three_state_density_gradient(
    s: &ThreeState,
    n: f64,
    env: &Environment,
    veh: &VehicleParams,
) -> Result<[f64; 5], DynamicsError> {
    let mut e = FlowEval::zeros(5);
    derivatives(&s.to_array(), env, veh, &mut e)?;
    Ok(core::array::from_fn(|i| if n == 0.0 { 0.0 } else { -e.divergence_grad[i] * n }))
}

/// Three-state model bound to an environment and vehicle.
#[derive(Debug, Clone, PartialEq)]
pub struct ThreeStateModel {
    pub env: Environment,
    pub vehicle: VehicleParams,
    /// Altitude at which trajectories terminate (m).
    pub ground_altitude: f64,
}

impl Characteristics for ThreeStateModel {
    fn flavor(&self) -> Flavor {
        Flavor::ThreeState
    }

    fn rates(&self, _t: f64, x: &[f64], out: &mut [f64]) -> Result<(), DynamicsError> {
        let d = rates(&[x[0], x[1], x[2], x[3], x[4]], &self.env, &self.vehicle)?;
        out[..5].copy_from_slice(&d);
        Ok(())
    }

    fn rates_full(&self, _t: f64, x: &[f64], out: &mut FlowEval) -> Result<(), DynamicsError> {
        derivatives(x, &self.env, &self.vehicle, out)?;
        // The plain path is the reference for the state rates so that
        // continuum and Monte Carlo trajectories coincide bit for bit.
        let d = rates(&[x[0], x[1], x[2], x[3], x[4]], &self.env, &self.vehicle)?;
        out.rates[..5].copy_from_slice(&d);
        Ok(())
    }

    fn stop_value(&self, _t: f64, x: &[f64]) -> Option<f64> {
        Some(x[0] - self.env.planet.radius - self.ground_altitude)
    }
}
