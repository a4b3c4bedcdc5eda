//! Environment models and the right-hand sides of the characteristic ODEs.
//!
//! Along a characteristic of the continuity equation the state follows
//! `ẋ = f(x)` and the density obeys `ṅ = −(∇·f)·n`. Propagation also needs
//! the Jacobian `J = ∂f/∂x` and the divergence gradient `∇(∇·f)` to carry
//! `∇n` along; [`Characteristics::rates_full`] returns all of them.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod atmosphere;
pub mod gravity;
pub mod six_state;
pub mod three_state;
pub mod us76;

pub use atmosphere::{AtmosphereModel, DensitySample, LogSpline};
pub use gravity::GravityModel;
pub use six_state::{six_state_divergence, six_state_rhs, SingularityGuards, SixState, SixStateModel};
pub use three_state::{
    three_state_density_gradient, three_state_density_rate, three_state_rhs, ThreeState, ThreeStateModel,
};

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum DynamicsError {
    #[error("altitude {altitude} m outside model validity range [{min}, {max}] m")]
    AltitudeOutOfRange { altitude: f64, min: f64, max: f64 },
    #[error("velocity {v} m/s must be positive")]
    NonPositiveVelocity { v: f64 },
    #[error("radius {r} m must be positive")]
    NonPositiveRadius { r: f64 },
    #[error("flight-path angle {gamma} rad too close to horizontal for radius-domain integration")]
    NearHorizontal { gamma: f64 },
    #[error("latitude {phi} rad too close to a pole")]
    NearPolar { phi: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
}

/// Planet constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanetParams {
    /// Reference radius (m); altitude is measured from it.
    pub radius: f64,
    /// Gravitational parameter (m³/s²).
    pub mu: f64,
    /// Rotation rate (rad/s).
    pub omega: f64,
    /// Sea-level density used to scale heat-rate correlations (kg/m³).
    pub rho_sl: f64,
}

impl PlanetParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.radius > 0.0 && self.mu > 0.0 && self.rho_sl > 0.0 && self.omega >= 0.0) {
            return Err(DynamicsError::InvalidParameter("planet constants must be positive (rotation ≥ 0)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    /// Nominal ballistic coefficient `m/(C_D S)` (kg/m²).
    pub beta: f64,
    /// Modified lift coefficient `C_L S/m` (m²/kg), six-state model.
    pub alpha_lift: f64,
    /// Lift-to-drag ratio, three-state model.
    pub cl_over_cd: f64,
}

impl VehicleParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.beta > 0.0) || !(self.alpha_lift >= 0.0) || !self.cl_over_cd.is_finite() {
            return Err(DynamicsError::InvalidParameter("vehicle needs β > 0 and α_lift ≥ 0"));
        }
        Ok(())
    }
}

/// Atmosphere, gravity and planet constants.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    pub planet: PlanetParams,
    pub atmosphere: AtmosphereModel,
    pub gravity: GravityModel,
}

/// Which state vector a snapshot carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flavor {
    /// `(r, v, γ, β, ξ)` against time.
    ThreeState,
    /// `(λ, φ, v, γ, χ, β, ξ)` against radius.
    SixState,
    /// Unnamed components `x0, x1, …` (test systems).
    Generic(usize),
}

const THREE_NAMES: [&str; 5] = ["r", "v", "gamma", "beta", "xi"];
const SIX_NAMES: [&str; 7] = ["lambda", "phi", "v", "gamma", "chi", "beta", "xi"];
const GENERIC_NAMES: [&str; 8] = ["x0", "x1", "x2", "x3", "x4", "x5", "x6", "x7"];

impl Flavor {
    pub fn dim(self) -> usize {
        match self {
            Flavor::ThreeState => 5,
            Flavor::SixState => 7,
            Flavor::Generic(d) => d,
        }
    }

    pub fn component_names(self) -> &'static [&'static str] {
        match self {
            Flavor::ThreeState => &THREE_NAMES,
            Flavor::SixState => &SIX_NAMES,
            Flavor::Generic(d) => &GENERIC_NAMES[..d.min(GENERIC_NAMES.len())],
        }
    }

    pub fn component_index(self, name: &str) -> Option<usize> {
        self.component_names().iter().position(|&c| c == name)
    }

    /// Name of the independent variable.
    pub fn independent(self) -> &'static str {
        match self {
            Flavor::SixState => "r",
            _ => "t",
        }
    }
}

/// Rates, Jacobian (row-major), divergence and divergence gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowEval {
    pub rates: Vec<f64>,
    pub jacobian: Vec<f64>,
    pub divergence: f64,
    pub divergence_grad: Vec<f64>,
}

impl FlowEval {
    pub fn zeros(n: usize) -> Self {
        FlowEval {
            rates: alloc::vec![0.0; n],
            jacobian: alloc::vec![0.0; n * n],
            divergence: 0.0,
            divergence_grad: alloc::vec![0.0; n],
        }
    }
}

/// A vector field whose characteristics carry the density.
pub trait Characteristics: Sync {
    fn flavor(&self) -> Flavor;

    fn dim(&self) -> usize {
        self.flavor().dim()
    }

    /// State rates with respect to the independent variable `s`.
    fn rates(&self, s: f64, x: &[f64], out: &mut [f64]) -> Result<(), DynamicsError>;

    /// Rates plus the derivatives needed for density and gradient transport.
    fn rates_full(&self, s: f64, x: &[f64], out: &mut FlowEval) -> Result<(), DynamicsError>;

    /// Termination function: the trajectory ends where this crosses from
    /// positive to non-positive. `None` means no event.
    fn stop_value(&self, _s: f64, _x: &[f64]) -> Option<f64> {
        None
    }
}

/// `ẋ = A x`, used as the closed-form transport oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub n: usize,
    pub a: Vec<f64>,
}

impl Characteristics for LinearSystem {
    fn flavor(&self) -> Flavor {
        Flavor::Generic(self.n)
    }

    fn rates(&self, _s: f64, x: &[f64], out: &mut [f64]) -> Result<(), DynamicsError> {
        for i in 0..self.n {
            out[i] = (0..self.n).map(|j| self.a[i * self.n + j] * x[j]).sum();
        }
        Ok(())
    }

    fn rates_full(&self, s: f64, x: &[f64], out: &mut FlowEval) -> Result<(), DynamicsError> {
        self.rates(s, x, &mut out.rates)?;
        out.jacobian.copy_from_slice(&self.a);
        out.divergence = (0..self.n).map(|i| self.a[i * self.n + i]).sum();
        out.divergence_grad.iter_mut().for_each(|g| *g = 0.0);
        Ok(())
    }
}
