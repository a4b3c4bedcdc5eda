//! Scenario descriptions, the shipped entry cases, and the end-to-end
//! pipeline: sample, propagate (density-based and Monte Carlo), reconstruct
//! marginals, compare, and evaluate derived quantities and compliance.
//!
//! Every physical key carries its SI unit in the name. Angles are radians.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alpha_select::{select_alpha, AlphaPolicy};
use crate::dynamics::atmosphere::{mars_fit, us76, LogSpline, MARS_DENSITY_FIT};
use crate::dynamics::gravity::EARTH_J2;
use crate::dynamics::{
    AtmosphereModel, Characteristics, DynamicsError, Environment, Flavor, FlowEval, GravityModel, PlanetParams,
    SingularityGuards, SixStateModel, ThreeStateModel, VehicleParams,
};
use crate::exec::Executor;
use crate::integrate::Scheme;
use crate::marginalize::{default_bins_1d, default_bins_2d, marginal_with_spec, BinSpec, Marginal, MarginalConfig, PointCloud};
use crate::metrics::{
    hellinger_1d, hellinger_2d, moment_difference, moments_histogram, moments_samples, summarize, wasserstein1, Cdf,
    DistanceReport, Histogram, Histogram2d, Summary,
};
use crate::propagation::{
    propagate_continuum, propagate_mc, sample_initial, InitialDistribution, IntegratorConfig, Propagation,
    SamplingMode, Snapshot,
};
use crate::rng::{streams, sub_seed};
use crate::transform::{
    derived_marginal, parachute_window_probability, threshold_probability, velocity_windows,
    AltitudeVelocityMap, DerivedQuantity, HeatRateSpec, ParachuteWindow, Side, SpeedOfSound,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("unknown scenario `{0}`")]
    Unknown(String),
    #[error("{stage}: {message}")]
    Stage { stage: &'static str, message: String },
}

fn invalid(path: &str, message: impl ToString) -> ScenarioError {
    ScenarioError::Invalid { path: path.to_string(), message: message.to_string() }
}

/// A normally distributed input; `sigma = 0` fixes it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct Normal {
    pub mean: f64,
    #[serde(default)]
    pub sigma: f64,
}

impl Normal {
    pub const fn fixed(mean: f64) -> Self {
        Normal { mean, sigma: 0.0 }
    }

    pub const fn new(mean: f64, sigma: f64) -> Self {
        Normal { mean, sigma }
    }

    fn validate(&self, path: &str) -> Result<(), ScenarioError> {
        if !self.mean.is_finite() {
            return Err(invalid(&format!("{path}/mean"), "must be finite"));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(invalid(&format!("{path}/sigma"), "must be finite and non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct PlanetSpec {
    pub radius_m: f64,
    pub mu_m3_per_s2: f64,
    #[serde(default)]
    pub rotation_rad_per_s: f64,
    /// Reference sea-level density for the heat-rate correlation.
    pub sea_level_density_kg_per_m3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub enum AtmosphereSpec {
    /// `ρ0 exp((h_ref − h)/H)`.
    Exponential { reference_density_kg_per_m3: f64, scale_height_m: f64, reference_altitude_m: f64 },
    /// 1976 US Standard Atmosphere, shipped table.
    Us76,
    /// Mars polynomial fit of `ln ρ`.
    MarsMslFit,
    /// `exp(c0 + c1 h + … + c4 h⁴)` with `h` in metres, clamped outside the range.
    PolynomialExp { coefficients: [f64; 5], min_altitude_m: f64, max_altitude_m: f64 },
    /// Tabulated density, spline-interpolated in `ln ρ`.
    Table { altitude_m: Vec<f64>, density_kg_per_m3: Vec<f64> },
}

impl AtmosphereSpec {
    pub fn model(&self) -> Result<AtmosphereModel, DynamicsError> {
        Ok(match self {
            AtmosphereSpec::Exponential { reference_density_kg_per_m3, scale_height_m, reference_altitude_m } => {
                AtmosphereModel::Exponential {
                    rho0: *reference_density_kg_per_m3,
                    h1: *scale_height_m,
                    h2: *reference_altitude_m,
                }
            }
            AtmosphereSpec::Us76 => us76(),
            AtmosphereSpec::MarsMslFit => mars_fit(),
            AtmosphereSpec::PolynomialExp { coefficients, min_altitude_m, max_altitude_m } => {
                AtmosphereModel::PolynomialExp { c: *coefficients, h_min: *min_altitude_m, h_max: *max_altitude_m }
            }
            AtmosphereSpec::Table { altitude_m, density_kg_per_m3 } => {
                AtmosphereModel::TabulatedSmooth(LogSpline::from_density_table(altitude_m, density_kg_per_m3)?)
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub enum GravitySpec {
    InverseSquare,
    /// Zonal `J2` about the planet radius.
    J2 { j2: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct ThreeStateInitial {
    pub altitude_m: Normal,
    pub velocity_m_per_s: Normal,
    pub flight_path_angle_rad: Normal,
    pub ballistic_coefficient_kg_per_m2: Normal,
    pub atmospheric_correction: Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct SixStateInitial {
    /// Entry-interface altitude; the radius is the independent variable.
    pub altitude_m: f64,
    pub longitude_rad: Normal,
    pub latitude_rad: Normal,
    pub velocity_m_per_s: Normal,
    pub flight_path_angle_rad: Normal,
    pub heading_rad: Normal,
    pub ballistic_coefficient_kg_per_m2: Normal,
    pub atmospheric_correction: Normal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct TimeSchedule {
    pub start_s: f64,
    pub end_s: f64,
    pub snapshots_s: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct AltitudeSchedule {
    /// Integration stops here (or at the ground event, whichever first).
    pub end_m: f64,
    /// Decreasing snapshot altitudes.
    pub snapshots_m: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "flavor", rename_all = "snake_case", deny_unknown_fields)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub enum DynamicsSpec {
    /// Planar, non-rotating, time domain.
    ThreeState {
        initial: ThreeStateInitial,
        #[serde(default)]
        lift_to_drag: f64,
        #[serde(default)]
        ground_altitude_m: f64,
        schedule: TimeSchedule,
    },
    /// Rotating planet, radius domain.
    SixState {
        initial: SixStateInitial,
        #[serde(default)]
        lift_coefficient_m2_per_kg: f64,
        schedule: AltitudeSchedule,
    },
}

impl DynamicsSpec {
    pub fn flavor(&self) -> Flavor {
        match self {
            DynamicsSpec::ThreeState { .. } => Flavor::ThreeState,
            DynamicsSpec::SixState { .. } => Flavor::SixState,
        }
    }

    /// Initial mean and σ in state order.
    pub fn initial_normals(&self, radius: f64) -> Vec<Normal> {
        match self {
            DynamicsSpec::ThreeState { initial: i, .. } => alloc::vec![
                Normal::new(radius + i.altitude_m.mean, i.altitude_m.sigma),
                i.velocity_m_per_s,
                i.flight_path_angle_rad,
                i.ballistic_coefficient_kg_per_m2,
                i.atmospheric_correction,
            ],
            DynamicsSpec::SixState { initial: i, .. } => alloc::vec![
                i.longitude_rad,
                i.latitude_rad,
                i.velocity_m_per_s,
                i.flight_path_angle_rad,
                i.heading_rad,
                i.ballistic_coefficient_kg_per_m2,
                i.atmospheric_correction,
            ],
        }
    }
}

/// Which marginals to reconstruct and how.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct ReconstructionSpec {
    pub marginal: MarginalConfig,
    pub sampling: SamplingMode,
    /// Component names; empty means every uncertain component.
    pub marginals_1d: Vec<String>,
    pub marginals_2d: Vec<[String; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct ThresholdSpec {
    /// `dynamic_pressure` (Pa) or `heat_rate` (W/m²).
    pub quantity: String,
    pub value_si: f64,
    pub side: Side,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct DerivedSpec {
    pub quantities: Vec<DerivedQuantity>,
    #[serde(default)]
    pub thresholds: Vec<ThresholdSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct ParachuteSpec {
    #[serde(default)]
    pub window: ParachuteWindow,
    pub speed_of_sound: SpeedOfSound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct OutputSpec {
    pub derived: Option<DerivedSpec>,
    pub parachute: Option<ParachuteSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct RunOptions {
    /// Density-based sample count.
    pub samples: usize,
    /// Monte Carlo ensemble sizes; the largest is the reference.
    #[serde(default)]
    pub mc_samples: Vec<usize>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub planet: PlanetSpec,
    pub atmosphere: AtmosphereSpec,
    pub gravity: GravitySpec,
    pub dynamics: DynamicsSpec,
    #[serde(default)]
    pub integrator: Scheme,
    #[serde(default)]
    pub reconstruction: ReconstructionSpec,
    #[serde(default)]
    pub outputs: OutputSpec,
    pub run: RunOptions,
}

/// Dynamics bound to their environment.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Three(ThreeStateModel),
    Six(SixStateModel),
}

impl Model {
    pub fn env(&self) -> &Environment {
        match self {
            Model::Three(m) => &m.env,
            Model::Six(m) => &m.env,
        }
    }
}

impl Characteristics for Model {
    fn flavor(&self) -> Flavor {
        match self {
            Model::Three(m) => m.flavor(),
            Model::Six(m) => m.flavor(),
        }
    }

    fn rates(&self, s: f64, x: &[f64], out: &mut [f64]) -> Result<(), DynamicsError> {
        match self {
            Model::Three(m) => m.rates(s, x, out),
            Model::Six(m) => m.rates(s, x, out),
        }
    }

    fn rates_full(&self, s: f64, x: &[f64], out: &mut FlowEval) -> Result<(), DynamicsError> {
        match self {
            Model::Three(m) => m.rates_full(s, x, out),
            Model::Six(m) => m.rates_full(s, x, out),
        }
    }

    fn stop_value(&self, s: f64, x: &[f64]) -> Option<f64> {
        match self {
            Model::Three(m) => m.stop_value(s, x),
            Model::Six(m) => m.stop_value(s, x),
        }
    }
}

/// Everything needed to propagate a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Built {
    pub model: Model,
    pub initial: InitialDistribution,
    pub integrator: IntegratorConfig,
    /// State indices of the uncertain components, the reconstruction axes.
    pub axes: Vec<usize>,
}

fn positive(v: f64, path: &str) -> Result<(), ScenarioError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(path, "must be positive and finite"))
    }
}

impl Scenario {
    pub fn flavor(&self) -> Flavor {
        self.dynamics.flavor()
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.name.is_empty() {
            return Err(invalid("/name", "must not be empty"));
        }
        let p = &self.planet;
        positive(p.radius_m, "/planet/radius_m")?;
        positive(p.mu_m3_per_s2, "/planet/mu_m3_per_s2")?;
        positive(p.sea_level_density_kg_per_m3, "/planet/sea_level_density_kg_per_m3")?;
        if !(p.rotation_rad_per_s >= 0.0 && p.rotation_rad_per_s.is_finite()) {
            return Err(invalid("/planet/rotation_rad_per_s", "must be finite and non-negative"));
        }
        match &self.atmosphere {
            AtmosphereSpec::Exponential { reference_density_kg_per_m3, scale_height_m, reference_altitude_m } => {
                if !(*reference_density_kg_per_m3 >= 0.0) {
                    return Err(invalid("/atmosphere/reference_density_kg_per_m3", "must be non-negative"));
                }
                positive(*scale_height_m, "/atmosphere/scale_height_m")?;
                if !reference_altitude_m.is_finite() {
                    return Err(invalid("/atmosphere/reference_altitude_m", "must be finite"));
                }
            }
            AtmosphereSpec::PolynomialExp { coefficients, min_altitude_m, max_altitude_m } => {
                if coefficients.iter().any(|c| !c.is_finite()) || !(max_altitude_m > min_altitude_m) {
                    return Err(invalid("/atmosphere", "finite coefficients and a non-empty altitude range required"));
                }
            }
            AtmosphereSpec::Table { .. } => {
                self.atmosphere.model().map_err(|e| invalid("/atmosphere", e))?;
            }
            AtmosphereSpec::Us76 | AtmosphereSpec::MarsMslFit => {}
        }
        if let GravitySpec::J2 { j2 } = self.gravity {
            if !j2.is_finite() {
                return Err(invalid("/gravity/j2", "must be finite"));
            }
        }
        match &self.dynamics {
            DynamicsSpec::ThreeState { initial, lift_to_drag, ground_altitude_m, schedule } => {
                let i = initial;
                for (n, key) in [
                    (i.altitude_m, "altitude_m"),
                    (i.velocity_m_per_s, "velocity_m_per_s"),
                    (i.flight_path_angle_rad, "flight_path_angle_rad"),
                    (i.ballistic_coefficient_kg_per_m2, "ballistic_coefficient_kg_per_m2"),
                    (i.atmospheric_correction, "atmospheric_correction"),
                ] {
                    n.validate(&format!("/dynamics/initial/{key}"))?;
                }
                positive(i.velocity_m_per_s.mean, "/dynamics/initial/velocity_m_per_s/mean")?;
                positive(i.ballistic_coefficient_kg_per_m2.mean, "/dynamics/initial/ballistic_coefficient_kg_per_m2/mean")?;
                positive(i.atmospheric_correction.mean, "/dynamics/initial/atmospheric_correction/mean")?;
                if !lift_to_drag.is_finite() {
                    return Err(invalid("/dynamics/lift_to_drag", "must be finite"));
                }
                if !(ground_altitude_m.is_finite() && *ground_altitude_m < i.altitude_m.mean) {
                    return Err(invalid("/dynamics/ground_altitude_m", "must lie below the initial altitude"));
                }
                let s = schedule;
                if !(s.end_s > s.start_s) {
                    return Err(invalid("/dynamics/schedule/end_s", "must exceed start_s"));
                }
                if s.snapshots_s.is_empty()
                    || s.snapshots_s.windows(2).any(|w| !(w[1] > w[0]))
                    || s.snapshots_s.iter().any(|&t| !(t >= s.start_s && t <= s.end_s))
                {
                    return Err(invalid("/dynamics/schedule/snapshots_s", "must be increasing within [start_s, end_s]"));
                }
            }
            DynamicsSpec::SixState { initial, lift_coefficient_m2_per_kg, schedule } => {
                let i = initial;
                for (n, key) in [
                    (i.longitude_rad, "longitude_rad"),
                    (i.latitude_rad, "latitude_rad"),
                    (i.velocity_m_per_s, "velocity_m_per_s"),
                    (i.flight_path_angle_rad, "flight_path_angle_rad"),
                    (i.heading_rad, "heading_rad"),
                    (i.ballistic_coefficient_kg_per_m2, "ballistic_coefficient_kg_per_m2"),
                    (i.atmospheric_correction, "atmospheric_correction"),
                ] {
                    n.validate(&format!("/dynamics/initial/{key}"))?;
                }
                positive(i.velocity_m_per_s.mean, "/dynamics/initial/velocity_m_per_s/mean")?;
                positive(i.ballistic_coefficient_kg_per_m2.mean, "/dynamics/initial/ballistic_coefficient_kg_per_m2/mean")?;
                positive(i.atmospheric_correction.mean, "/dynamics/initial/atmospheric_correction/mean")?;
                if !(i.flight_path_angle_rad.mean < 0.0) {
                    return Err(invalid(
                        "/dynamics/initial/flight_path_angle_rad/mean",
                        "radius-domain integration needs a descending entry",
                    ));
                }
                if !(*lift_coefficient_m2_per_kg >= 0.0) {
                    return Err(invalid("/dynamics/lift_coefficient_m2_per_kg", "must be non-negative"));
                }
                let s = schedule;
                if !(s.end_m < i.altitude_m) || !(s.end_m > -self.planet.radius_m) {
                    return Err(invalid("/dynamics/schedule/end_m", "must lie below the initial altitude"));
                }
                if s.snapshots_m.is_empty()
                    || s.snapshots_m.windows(2).any(|w| !(w[1] < w[0]))
                    || s.snapshots_m.iter().any(|&h| !(h <= i.altitude_m && h >= s.end_m))
                {
                    return Err(invalid("/dynamics/schedule/snapshots_m", "must be decreasing within [end_m, altitude_m]"));
                }
            }
        }
        let normals = self.dynamics.initial_normals(self.planet.radius_m);
        if normals.iter().all(|n| n.sigma == 0.0) {
            return Err(invalid("/dynamics/initial", "at least one component must be uncertain"));
        }
        match self.integrator {
            Scheme::Rk4 { step } => positive(step, "/integrator/step")?,
            Scheme::Rk45 { atol, rtol } => {
                positive(atol, "/integrator/atol")?;
                positive(rtol, "/integrator/rtol")?;
            }
        }
        let r = &self.reconstruction;
        r.marginal.validate().map_err(|e| invalid("/reconstruction/marginal", e))?;
        let flavor = self.flavor();
        let uncertain = |name: &str, path: &str| -> Result<(), ScenarioError> {
            match flavor.component_index(name) {
                Some(k) if normals[k].sigma > 0.0 => Ok(()),
                Some(_) => Err(invalid(path, format!("`{name}` is fixed; only uncertain components can be reconstructed"))),
                None => Err(invalid(path, format!("unknown component `{name}`; expected one of {:?}", flavor.component_names()))),
            }
        };
        for (k, name) in r.marginals_1d.iter().enumerate() {
            uncertain(name, &format!("/reconstruction/marginals_1d/{k}"))?;
        }
        for (k, [a, b]) in r.marginals_2d.iter().enumerate() {
            uncertain(a, &format!("/reconstruction/marginals_2d/{k}/0"))?;
            uncertain(b, &format!("/reconstruction/marginals_2d/{k}/1"))?;
            if a == b {
                return Err(invalid(&format!("/reconstruction/marginals_2d/{k}"), "axes must differ"));
            }
        }
        if let Some(d) = &self.outputs.derived {
            if flavor != Flavor::ThreeState {
                return Err(invalid("/outputs/derived", "derived (h, v) quantities need the time-domain three-state model"));
            }
            for key in ["r", "v"] {
                uncertain(key, "/outputs/derived")?;
            }
            for (k, q) in d.quantities.iter().enumerate() {
                if let DerivedQuantity::DkrHeatRate { spec } = q {
                    spec.validate().map_err(|e| invalid(&format!("/outputs/derived/quantities/{k}/spec"), e))?;
                }
            }
            for (k, t) in d.thresholds.iter().enumerate() {
                if !d.quantities.iter().any(|q| q.name() == t.quantity) {
                    return Err(invalid(&format!("/outputs/derived/thresholds/{k}/quantity"), "not among the derived quantities"));
                }
                if !t.value_si.is_finite() {
                    return Err(invalid(&format!("/outputs/derived/thresholds/{k}/value_si"), "must be finite"));
                }
            }
        }
        if let Some(pc) = &self.outputs.parachute {
            if flavor != Flavor::SixState {
                return Err(invalid("/outputs/parachute", "needs the altitude-domain six-state model"));
            }
            uncertain("v", "/outputs/parachute")?;
            let w = pc.window;
            if !(w.dynamic_pressure_max_pa > w.dynamic_pressure_min_pa && w.dynamic_pressure_min_pa >= 0.0) {
                return Err(invalid("/outputs/parachute/window", "dynamic-pressure window must be non-empty and non-negative"));
            }
            if !(w.mach_max > w.mach_min && w.mach_min >= 0.0) {
                return Err(invalid("/outputs/parachute/window", "Mach window must be non-empty and non-negative"));
            }
        }
        let need = normals.iter().filter(|n| n.sigma > 0.0).count() + 2;
        if self.run.samples < need {
            return Err(invalid("/run/samples", format!("at least {need} samples are needed")));
        }
        if let Some(k) = self.run.mc_samples.iter().position(|&m| m < 2) {
            return Err(invalid(&format!("/run/mc_samples/{k}"), "at least 2 samples are needed"));
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Built, ScenarioError> {
        self.validate()?;
        let p = &self.planet;
        let planet = PlanetParams {
            radius: p.radius_m,
            mu: p.mu_m3_per_s2,
            omega: p.rotation_rad_per_s,
            rho_sl: p.sea_level_density_kg_per_m3,
        };
        let gravity = match self.gravity {
            GravitySpec::InverseSquare => GravityModel::InverseSquare { mu: planet.mu },
            GravitySpec::J2 { j2 } => GravityModel::J2 { mu: planet.mu, j2, rp: planet.radius },
        };
        let atmosphere = self.atmosphere.model().map_err(|e| invalid("/atmosphere", e))?;
        let env = Environment { planet, atmosphere, gravity };
        let normals = self.dynamics.initial_normals(planet.radius);
        let mean: Vec<f64> = normals.iter().map(|n| n.mean).collect();
        let sigma: Vec<f64> = normals.iter().map(|n| n.sigma).collect();
        let initial = InitialDistribution::diagonal(&mean, &sigma);
        let (model, integrator) = match &self.dynamics {
            DynamicsSpec::ThreeState { initial: i, lift_to_drag, ground_altitude_m, schedule } => {
                let vehicle =
                    VehicleParams { beta: i.ballistic_coefficient_kg_per_m2.mean, alpha_lift: 0.0, cl_over_cd: *lift_to_drag };
                let cfg = IntegratorConfig {
                    scheme: self.integrator,
                    start: schedule.start_s,
                    end: schedule.end_s,
                    schedule: schedule.snapshots_s.clone(),
                };
                (Model::Three(ThreeStateModel { env, vehicle, ground_altitude: *ground_altitude_m }), cfg)
            }
            DynamicsSpec::SixState { initial: i, lift_coefficient_m2_per_kg, schedule } => {
                let vehicle = VehicleParams {
                    beta: i.ballistic_coefficient_kg_per_m2.mean,
                    alpha_lift: *lift_coefficient_m2_per_kg,
                    cl_over_cd: 0.0,
                };
                let r = planet.radius;
                let cfg = IntegratorConfig {
                    scheme: self.integrator,
                    start: r + i.altitude_m,
                    end: r + schedule.end_m,
                    schedule: schedule.snapshots_m.iter().map(|h| r + h).collect(),
                };
                (Model::Six(SixStateModel { env, vehicle, guards: SingularityGuards::default() }), cfg)
            }
        };
        integrator.validate().map_err(|e| invalid("/dynamics/schedule", e))?;
        let axes = initial.uncertain_indices();
        Ok(Built { model, initial, integrator, axes })
    }

    /// Components to reconstruct in 1-D.
    pub fn marginal_components(&self) -> Vec<String> {
        if !self.reconstruction.marginals_1d.is_empty() {
            return self.reconstruction.marginals_1d.clone();
        }
        let normals = self.dynamics.initial_normals(self.planet.radius_m);
        let names = self.flavor().component_names();
        (0..names.len()).filter(|&k| normals[k].sigma > 0.0).map(|k| names[k].to_string()).collect()
    }
}

fn deg(x: f64) -> f64 {
    x.to_radians()
}

/// Strategic three-state Earth entry. `literal_velocity_sigma` reads the
/// velocity σ as 5 km/s exactly as tabulated; otherwise 5 m/s.
fn strategic(literal_velocity_sigma: bool) -> Scenario {
    let (name, sigma_v, description) = if literal_velocity_sigma {
        ("strategic_3state_literal", 5000.0, "Strategic Earth entry with the velocity spread read as 5 km/s; most samples leave the physical domain.")
    } else {
        ("strategic_3state", 5.0, "Strategic three-state Earth entry, velocity spread 5 m/s.")
    };
    Scenario {
        name: name.into(),
        description: description.into(),
        planet: PlanetSpec {
            radius_m: 6378.1e3,
            mu_m3_per_s2: 3.986e14,
            rotation_rad_per_s: 0.0,
            sea_level_density_kg_per_m3: 1.225,
        },
        atmosphere: AtmosphereSpec::Exponential {
            reference_density_kg_per_m3: 1.215,
            scale_height_m: 8.3e3,
            reference_altitude_m: 0.0,
        },
        gravity: GravitySpec::InverseSquare,
        dynamics: DynamicsSpec::ThreeState {
            initial: ThreeStateInitial {
                altitude_m: Normal::new(125e3, 2e3),
                velocity_m_per_s: Normal::new(7.2e3, sigma_v),
                flight_path_angle_rad: Normal::new(deg(-30.0), deg(0.1)),
                ballistic_coefficient_kg_per_m2: Normal::new(10000.0, 500.0),
                atmospheric_correction: Normal::fixed(1.0),
            },
            lift_to_drag: 0.0,
            ground_altitude_m: 0.0,
            schedule: TimeSchedule { start_s: 0.0, end_s: 40.0, snapshots_s: (1..=20).map(|k| 2.0 * k as f64).collect() },
        },
        integrator: Scheme::default(),
        reconstruction: ReconstructionSpec {
            marginals_1d: alloc::vec!["r".into(), "v".into(), "gamma".into()],
            marginals_2d: alloc::vec![["r".into(), "v".into()]],
            ..Default::default()
        },
        outputs: OutputSpec {
            derived: Some(DerivedSpec {
                quantities: alloc::vec![
                    DerivedQuantity::DynamicPressure,
                    DerivedQuantity::DkrHeatRate {
                        spec: HeatRateSpec { nose_radius_m: 1.0, averaging_factor: 0.234, rho_sl_kg_per_m3: 1.225 },
                    },
                ],
                thresholds: alloc::vec![
                    ThresholdSpec { quantity: "dynamic_pressure".into(), value_si: 68e3, side: Side::Above },
                    ThresholdSpec { quantity: "heat_rate".into(), value_si: 77e4, side: Side::Above },
                ],
            }),
            parachute: None,
        },
        run: RunOptions { samples: 750, mc_samples: alloc::vec![750, 5000], seed: 42 },
    }
}

fn earth_6state() -> Scenario {
    Scenario {
        name: "earth_6state".into(),
        description: "Six-state steep Earth entry with J2 gravity, US 1976 atmosphere and an uncertain density correction.".into(),
        planet: PlanetSpec {
            radius_m: 6378.1e3,
            mu_m3_per_s2: 3.986e14,
            rotation_rad_per_s: 7.2921159e-5,
            sea_level_density_kg_per_m3: 1.225,
        },
        atmosphere: AtmosphereSpec::Us76,
        gravity: GravitySpec::J2 { j2: EARTH_J2 },
        dynamics: DynamicsSpec::SixState {
            initial: SixStateInitial {
                altitude_m: 125e3,
                longitude_rad: Normal::new(0.0, deg(0.2)),
                latitude_rad: Normal::new(0.0, deg(0.2)),
                velocity_m_per_s: Normal::new(7.2e3, 36.0),
                flight_path_angle_rad: Normal::new(deg(-30.0), deg(0.15)),
                heading_rad: Normal::new(deg(45.0), deg(0.225)),
                ballistic_coefficient_kg_per_m2: Normal::fixed(10000.0),
                atmospheric_correction: Normal::new(1.0, 0.05),
            },
            lift_coefficient_m2_per_kg: 0.0,
            schedule: AltitudeSchedule { end_m: 0.0, snapshots_m: alloc::vec![100e3, 75e3, 50e3, 25e3, 10e3, 0.0] },
        },
        integrator: Scheme::default(),
        reconstruction: ReconstructionSpec {
            marginals_2d: alloc::vec![["lambda".into(), "phi".into()]],
            ..Default::default()
        },
        outputs: OutputSpec::default(),
        run: RunOptions { samples: 1000, mc_samples: alloc::vec![1000, 5000], seed: 42 },
    }
}

fn mars_6state() -> Scenario {
    let snapshots: Vec<f64> = alloc::vec![100e3, 50e3, 20e3, 15e3, 10e3, 7e3, 5e3, 3e3, 1e3];
    Scenario {
        name: "mars_6state".into(),
        description: "Six-state lifting Mars entry with the polynomial density fit and parachute-deployment compliance.".into(),
        planet: PlanetSpec {
            radius_m: 3397e3,
            mu_m3_per_s2: 4.283e13,
            rotation_rad_per_s: 7.095e-5,
            sea_level_density_kg_per_m3: libm::exp(MARS_DENSITY_FIT[0]),
        },
        atmosphere: AtmosphereSpec::MarsMslFit,
        gravity: GravitySpec::InverseSquare,
        dynamics: DynamicsSpec::SixState {
            initial: SixStateInitial {
                altitude_m: 126e3,
                longitude_rad: Normal::new(deg(-90.07), deg(0.5)),
                latitude_rad: Normal::new(deg(-43.9), deg(0.5)),
                velocity_m_per_s: Normal::new(5.505e3, 4.0),
                flight_path_angle_rad: Normal::new(deg(-14.15), deg(0.023)),
                heading_rad: Normal::fixed(deg(4.99)),
                ballistic_coefficient_kg_per_m2: Normal::new(125.0, 3.5),
                atmospheric_correction: Normal::new(1.0, 0.05),
            },
            lift_coefficient_m2_per_kg: 0.001,
            schedule: AltitudeSchedule { end_m: 500.0, snapshots_m: snapshots },
        },
        integrator: Scheme::default(),
        reconstruction: ReconstructionSpec {
            marginals_2d: alloc::vec![["lambda".into(), "phi".into()]],
            ..Default::default()
        },
        outputs: OutputSpec {
            derived: None,
            parachute: Some(ParachuteSpec { window: ParachuteWindow::default(), speed_of_sound: SpeedOfSound::MARS }),
        },
        run: RunOptions { samples: 1000, mc_samples: alloc::vec![1000, 5000], seed: 42 },
    }
}

/// The shipped scenarios.
pub fn builtin_scenarios() -> Vec<Scenario> {
    alloc::vec![strategic(false), strategic(true), earth_6state(), mars_6state()]
}

pub fn builtin(name: &str) -> Result<Scenario, ScenarioError> {
    builtin_scenarios().into_iter().find(|s| s.name == name).ok_or_else(|| ScenarioError::Unknown(name.into()))
}

/// Wall-clock source for stage timings.
pub trait Clock {
    /// Seconds since an arbitrary origin.
    fn now(&self) -> f64;
}

/// Reports zero for every stage.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageError {
    pub stage: String,
    /// Snapshot value of the independent variable, when the error is local to one.
    pub indep: Option<f64>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaRecord {
    pub indep: f64,
    pub alpha: f64,
    pub score: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedMarginal {
    pub components: Vec<String>,
    pub marginal: Marginal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedResult {
    pub quantity: String,
    pub marginal: Marginal,
    /// Samples dropped by a singular map.
    pub excluded: usize,
    /// Mass of the (h, v) marginal the samples were read from.
    pub source_mass: f64,
}

/// Density-based results at one snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbSnapshot {
    pub indep: f64,
    pub active: usize,
    pub marginals_1d: Vec<NamedMarginal>,
    pub marginals_2d: Vec<NamedMarginal>,
    pub derived: Vec<DerivedResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSnapshot {
    pub indep: f64,
    pub active: usize,
    pub histograms_1d: Vec<(String, Histogram)>,
    pub histograms_2d: Vec<([String; 2], Histogram2d)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McRun {
    pub samples: usize,
    pub propagation: Propagation,
    pub snapshots: Vec<McSnapshot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentComparison {
    pub component: String,
    pub distances: DistanceReport,
    /// Relative difference of the means per snapshot.
    pub mean_difference: Vec<f64>,
    pub std_difference: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairComparison {
    pub components: [String; 2],
    pub indep: Vec<f64>,
    pub hellinger: Vec<f64>,
    pub hellinger_summary: Summary,
}

/// One method against the reference ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub method: String,
    pub reference: String,
    pub components: Vec<ComponentComparison>,
    pub pairs: Vec<PairComparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplianceSeries {
    pub name: String,
    pub indep: Vec<f64>,
    pub probability: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Timings {
    pub propagation_db_s: f64,
    pub marginalization_db_s: f64,
    /// `(samples, propagation, histogramming)` per Monte Carlo run.
    pub mc_s: Vec<(usize, f64, f64)>,
    pub total_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub scenario: Scenario,
    pub options: RunOptions,
    pub components: Vec<String>,
    pub db: Propagation,
    pub db_snapshots: Vec<DbSnapshot>,
    pub alpha_log: Vec<AlphaRecord>,
    pub mc: Vec<McRun>,
    pub comparisons: Vec<Comparison>,
    pub compliance: Vec<ComplianceSeries>,
    pub timings: Timings,
    pub errors: Vec<StageError>,
}

fn stage<E: core::fmt::Display>(stage: &'static str) -> impl Fn(E) -> ScenarioError {
    move |e| ScenarioError::Stage { stage, message: e.to_string() }
}

/// Range of component `k` over the active samples of all snapshots given.
fn joint_range(snaps: &[&Snapshot], k: usize) -> Option<(f64, f64)> {
    let (lo, hi) = snaps
        .iter()
        .flat_map(|s| s.active().map(move |x| x.state[k]))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
    (hi > lo && (hi - lo).is_finite()).then_some((lo, hi))
}

fn active_values(s: &Snapshot, k: usize) -> Vec<f64> {
    s.active().map(|x| x.state[k]).collect()
}

/// One snapshot of a 1-D comparison against a reference ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointComparison {
    pub hellinger: f64,
    /// Δ_W in axis units.
    pub wasserstein: f64,
    pub reference_std: f64,
    pub mean_difference: f64,
    pub std_difference: f64,
}

/// Compare a binned distribution with a reference histogram on the same
/// edges. Δ_W and the moments use raw samples where they exist, so only
/// reconstructed densities are seen through their bins.
pub fn compare_1d(
    method: &Histogram,
    method_samples: Option<&[f64]>,
    reference: &Histogram,
    reference_samples: Option<&[f64]>,
) -> PointComparison {
    let nan = f64::NAN;
    let hellinger = hellinger_1d(method, reference).unwrap_or(nan);
    let cdf = |h: &Histogram, x: Option<&[f64]>| match x {
        Some(x) => Cdf::from_samples(x),
        None => Cdf::from_histogram(h),
    };
    let wasserstein = match (cdf(method, method_samples), cdf(reference, reference_samples)) {
        (Ok(p), Ok(q)) => wasserstein1(&p, &q),
        _ => nan,
    };
    let moments = |h: &Histogram, x: Option<&[f64]>| match x {
        Some(x) => moments_samples(x),
        None => moments_histogram(h),
    };
    let (moments, rm) = (moments(method, method_samples), moments(reference, reference_samples));
    let (mean_difference, std_difference) = match (&moments, &rm) {
        (Ok(m), Ok(r)) => {
            let d = moment_difference(m, r);
            (d.mean, d.std)
        }
        _ => (nan, nan),
    };
    PointComparison { hellinger, wasserstein, reference_std: rm.map_or(0.0, |r| r.std), mean_difference, std_difference }
}

/// Propagate, reconstruct and compare. Stage failures local to a snapshot
/// are recorded in `errors` and the run continues.
pub fn run_pipeline<E: Executor>(
    scenario: &Scenario,
    options: &RunOptions,
    exec: &E,
    clock: &dyn Clock,
) -> Result<RunArtifacts, ScenarioError> {
    let t_begin = clock.now();
    let built = scenario.build()?;
    let flavor = scenario.flavor();
    let radius = scenario.planet.radius_m;
    let recon = &scenario.reconstruction;
    let cfg = recon.marginal;
    let mut errors = Vec::new();
    let mut timings = Timings::default();

    // Density-based propagation.
    let t0 = clock.now();
    let samples = sample_initial(&built.initial, options.samples, sub_seed(options.seed, streams::CONTINUUM_SAMPLES), recon.sampling)
        .map_err(stage("sampling"))?;
    let db = propagate_continuum(&samples, &built.model, &built.integrator, exec).map_err(stage("propagation"))?;
    timings.propagation_db_s = clock.now() - t0;
    for f in &db.failures {
        errors.push(StageError { stage: "propagation".into(), indep: None, message: format!("sample {}: {}", f.index, f.error) });
    }

    // Monte Carlo ensembles, each from its own stream.
    let mut mc_sizes = options.mc_samples.clone();
    mc_sizes.sort_unstable();
    mc_sizes.dedup();
    let mut mc_props = Vec::new();
    for (k, &m) in mc_sizes.iter().enumerate() {
        let t = clock.now();
        let seed = sub_seed(sub_seed(options.seed, streams::MC_SAMPLES), k as u64);
        let states: Vec<Vec<f64>> = sample_initial(&built.initial, m.max(built.initial.dim() + 1), seed, SamplingMode::PseudoRandom)
            .map_err(stage("mc sampling"))?
            .into_iter()
            .take(m)
            .map(|s| s.state)
            .collect();
        let p = propagate_mc(&states, &built.model, &built.integrator, exec).map_err(stage("mc propagation"))?;
        mc_props.push((m, p, clock.now() - t));
    }

    let comp_names = scenario.marginal_components();
    let comp_idx: Vec<usize> = comp_names.iter().map(|c| flavor.component_index(c).expect("validated")).collect();
    let pairs: Vec<[String; 2]> = recon.marginals_2d.clone();
    let pair_idx: Vec<[usize; 2]> = pairs
        .iter()
        .map(|[a, b]| [flavor.component_index(a).expect("validated"), flavor.component_index(b).expect("validated")])
        .collect();
    // Position of a state index among the reconstruction axes.
    let axis_of = |k: usize| built.axes.iter().position(|&a| a == k).expect("validated as uncertain");

    let t_marg = clock.now();
    let mut db_snapshots = Vec::new();
    let mut alpha_log = Vec::new();
    let mut previous_alpha = None;
    let mut mc_snaps: Vec<Vec<McSnapshot>> = mc_props.iter().map(|_| Vec::new()).collect();
    let mut mc_hist_time = alloc::vec![0.0; mc_props.len()];
    for (si, snap) in db.snapshots.iter().enumerate() {
        let indep = snap.indep;
        let fail = |errors: &mut Vec<StageError>, st: &str, msg: String| {
            errors.push(StageError { stage: st.into(), indep: Some(indep), message: msg });
        };
        let mut all: Vec<&Snapshot> = alloc::vec![snap];
        all.extend(mc_props.iter().map(|(_, p, _)| &p.snapshots[si]));
        let mut out = DbSnapshot { indep, active: snap.active_count(), marginals_1d: Vec::new(), marginals_2d: Vec::new(), derived: Vec::new() };
        let cloud = match PointCloud::from_snapshot(snap, &built.axes) {
            Ok(c) if c.len() >= built.axes.len() + 2 => Some(c),
            Ok(c) => {
                fail(&mut errors, "marginalization", format!("{} active samples, too few to reconstruct", c.len()));
                None
            }
            Err(e) => {
                fail(&mut errors, "marginalization", e.to_string());
                None
            }
        };
        let mut alpha = None;
        if let (Some(c), AlphaPolicy::CrossValidated { cv, de, warm_start }) = (&cloud, &cfg.alpha) {
            let (_, scaled) = c.scaled();
            let prev = if *warm_start { previous_alpha } else { None };
            let seed = sub_seed(options.seed, streams::DIFFERENTIAL_EVOLUTION) ^ si as u64;
            match select_alpha(&scaled.points, c.dim, cv, de, prev, seed, exec) {
                Ok(sel) => {
                    alpha_log.push(AlphaRecord { indep, alpha: sel.alpha, score: sel.score, evaluations: sel.evaluations });
                    previous_alpha = Some(sel.alpha);
                    alpha = Some(sel.alpha);
                }
                Err(e) => fail(&mut errors, "alpha selection", e.to_string()),
            }
        }
        let nb1 = cfg.bins_1d.unwrap_or_else(|| default_bins_1d(snap.active_count().max(1)));
        let nb2 = cfg.bins_2d.unwrap_or_else(|| default_bins_2d(snap.active_count().max(1)));

        // 1-D: shared edges over the density-based and every Monte Carlo ensemble.
        let mut edges_1d: Vec<Option<Vec<f64>>> = Vec::new();
        for (name, &k) in comp_names.iter().zip(&comp_idx) {
            let range = joint_range(&all, k);
            let mut edges = None;
            if let (Some(c), Some(r)) = (&cloud, range) {
                match BinSpec::with_ranges(c, &[axis_of(k)], &[nb1], cfg.buffer, &[Some(r)])
                    .and_then(|spec| marginal_with_spec(c, &spec, &cfg, alpha, exec))
                {
                    Ok(m) => {
                        edges = Some(m.edges[0].clone());
                        out.marginals_1d.push(NamedMarginal { components: alloc::vec![name.clone()], marginal: m });
                    }
                    Err(e) => fail(&mut errors, "marginalization", format!("{name}: {e}")),
                }
            }
            edges_1d.push(edges.or_else(|| range.map(|(lo, hi)| (0..=nb1).map(|i| lo + (hi - lo) * i as f64 / nb1 as f64).collect())));
        }
        let mut edges_2d: Vec<Option<[Vec<f64>; 2]>> = Vec::new();
        for (pair, &[a, b]) in pairs.iter().zip(&pair_idx) {
            let (ra, rb) = (joint_range(&all, a), joint_range(&all, b));
            let mut edges = None;
            if let (Some(c), Some(ra), Some(rb)) = (&cloud, ra, rb) {
                match BinSpec::with_ranges(c, &[axis_of(a), axis_of(b)], &[nb2, nb2], cfg.buffer_2d, &[Some(ra), Some(rb)])
                    .and_then(|spec| marginal_with_spec(c, &spec, &cfg, alpha, exec))
                {
                    Ok(m) => {
                        edges = Some([m.edges[0].clone(), m.edges[1].clone()]);
                        out.marginals_2d.push(NamedMarginal { components: pair.to_vec(), marginal: m });
                    }
                    Err(e) => fail(&mut errors, "marginalization", format!("{}-{}: {e}", pair[0], pair[1])),
                }
            }
            edges_2d.push(edges);
        }

        // Derived quantities from the (h, v) joint marginal.
        if let (Some(d), Some(c)) = (&scenario.outputs.derived, &cloud) {
            let (ri, vi) = (axis_of(0), axis_of(1));
            let mut shifted = c.clone();
            shifted.points.chunks_exact_mut(c.dim).for_each(|p| p[ri] -= radius);
            let joint = BinSpec::from_cloud(&shifted, &[ri, vi], &[nb2, nb2], cfg.buffer_2d)
                .and_then(|spec| marginal_with_spec(&shifted, &spec, &cfg, alpha, exec));
            match joint {
                Ok(joint) => {
                    let hv: Vec<f64> = shifted.points.chunks_exact(c.dim).flat_map(|p| [p[ri], p[vi]]).collect();
                    let xi = match &scenario.dynamics {
                        DynamicsSpec::ThreeState { initial, .. } => initial.atmospheric_correction.mean,
                        DynamicsSpec::SixState { initial, .. } => initial.atmospheric_correction.mean,
                    };
                    for q in &d.quantities {
                        let map = AltitudeVelocityMap { quantity: *q, atmosphere: &built.model.env().atmosphere, xi };
                        match derived_marginal(&hv, &joint, &map, &cfg, exec) {
                            Ok(r) => out.derived.push(DerivedResult {
                                quantity: q.name().into(),
                                marginal: r.marginal,
                                excluded: r.cloud.excluded.len(),
                                source_mass: r.source_mass,
                            }),
                            Err(e) => fail(&mut errors, "derived", format!("{}: {e}", q.name())),
                        }
                    }
                }
                Err(e) => fail(&mut errors, "derived", e.to_string()),
            }
        }
        db_snapshots.push(out);

        // Monte Carlo histograms on the same edges.
        for (mi, (_, p, _)) in mc_props.iter().enumerate() {
            let t = clock.now();
            let s = &p.snapshots[si];
            let mut ms = McSnapshot { indep, active: s.active_count(), histograms_1d: Vec::new(), histograms_2d: Vec::new() };
            for ((name, &k), e) in comp_names.iter().zip(&comp_idx).zip(&edges_1d) {
                if let Some(e) = e {
                    if let Ok(h) = Histogram::from_samples(&active_values(s, k), e.clone()) {
                        ms.histograms_1d.push((name.clone(), h));
                    }
                }
            }
            for ((pair, &[a, b]), e) in pairs.iter().zip(&pair_idx).zip(&edges_2d) {
                if let Some(e) = e {
                    if let Ok(h) = Histogram2d::from_samples(&active_values(s, a), &active_values(s, b), e.clone()) {
                        ms.histograms_2d.push((pair.clone(), h));
                    }
                }
            }
            mc_snaps[mi].push(ms);
            mc_hist_time[mi] += clock.now() - t;
        }
    }
    let t_total_marg = clock.now() - t_marg;
    timings.marginalization_db_s = t_total_marg - mc_hist_time.iter().sum::<f64>();

    // Comparisons against the largest ensemble.
    let mut comparisons = Vec::new();
    if let Some(ref_idx) = mc_props.len().checked_sub(1) {
        let reference = format!("mc_{}", mc_props[ref_idx].0);
        let ref_snaps = &mc_snaps[ref_idx];
        let ref_prop = &mc_props[ref_idx].1;
        // The density-based method first, then the smaller ensembles.
        let mut methods: Vec<(String, Option<usize>)> = alloc::vec![(format!("db_{}", options.samples), None)];
        methods.extend((0..ref_idx).map(|i| (format!("mc_{}", mc_props[i].0), Some(i))));
        for (method, which) in methods {
            let mut components = Vec::new();
            for (name, &k) in comp_names.iter().zip(&comp_idx) {
                let (mut indep, mut hs, mut ws, mut dm, mut ds, mut rstd) =
                    (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
                for (si, rs) in ref_snaps.iter().enumerate() {
                    let Some((_, rh)) = rs.histograms_1d.iter().find(|(n, _)| n == name) else { continue };
                    let values;
                    let (hist, samples) = match which {
                        None => {
                            let Some(m) = db_snapshots[si].marginals_1d.iter().find(|m| m.components[0] == *name) else { continue };
                            let Some(h) = m.marginal.to_histogram() else { continue };
                            (h, None)
                        }
                        Some(i) => {
                            let Some((_, h)) = mc_snaps[i][si].histograms_1d.iter().find(|(n, _)| n == name) else { continue };
                            values = active_values(&mc_props[i].1.snapshots[si], k);
                            (h.clone(), Some(&values[..]))
                        }
                    };
                    let c = compare_1d(&hist, samples, rh, Some(&active_values(&ref_prop.snapshots[si], k)));
                    indep.push(rs.indep);
                    hs.push(c.hellinger);
                    ws.push(c.wasserstein);
                    rstd.push(c.reference_std);
                    dm.push(c.mean_difference);
                    ds.push(c.std_difference);
                }
                components.push(ComponentComparison {
                    component: name.clone(),
                    distances: DistanceReport::new(indep, hs, ws, &rstd),
                    mean_difference: dm,
                    std_difference: ds,
                });
            }
            let mut pcs = Vec::new();
            for pair in &pairs {
                let (mut indep, mut hs) = (Vec::new(), Vec::new());
                for (si, rs) in ref_snaps.iter().enumerate() {
                    let Some((_, rh)) = rs.histograms_2d.iter().find(|(n, _)| n == pair) else { continue };
                    let h = match which {
                        None => db_snapshots[si]
                            .marginals_2d
                            .iter()
                            .find(|m| m.components[..] == pair[..])
                            .and_then(|m| m.marginal.to_histogram_2d()),
                        Some(i) => mc_snaps[i][si].histograms_2d.iter().find(|(n, _)| n == pair).map(|(_, h)| h.clone()),
                    };
                    let Some(h) = h else { continue };
                    indep.push(rs.indep);
                    hs.push(hellinger_2d(&h, rh).unwrap_or(f64::NAN));
                }
                let summary = summarize(&hs);
                pcs.push(PairComparison { components: pair.clone(), indep, hellinger: hs, hellinger_summary: summary });
            }
            comparisons.push(Comparison { method, reference: reference.clone(), components, pairs: pcs });
        }
    }

    // Compliance series.
    let mut compliance = Vec::new();
    if let Some(d) = &scenario.outputs.derived {
        for t in &d.thresholds {
            let mut series = ComplianceSeries { name: format!("{}_{:?}_{}", t.quantity, t.side, t.value_si).to_lowercase(), indep: Vec::new(), probability: Vec::new() };
            for s in &db_snapshots {
                if let Some(r) = s.derived.iter().find(|r| r.quantity == t.quantity) {
                    if let Some(h) = r.marginal.to_histogram() {
                        series.indep.push(s.indep);
                        series.probability.push(threshold_probability(&h, t.value_si, t.side).probability);
                    }
                }
            }
            compliance.push(series);
        }
    }
    if let (Some(pc), DynamicsSpec::SixState { initial, .. }) = (&scenario.outputs.parachute, &scenario.dynamics) {
        let xi = initial.atmospheric_correction.mean;
        let atm = &built.model.env().atmosphere;
        let vk = flavor.component_index("v").expect("six-state has v");
        let mut db_series = ComplianceSeries { name: format!("parachute_db_{}", options.samples), indep: Vec::new(), probability: Vec::new() };
        for s in &db_snapshots {
            let Some(m) = s.marginals_1d.iter().find(|m| m.components[0] == "v") else { continue };
            let Some(h) = m.marginal.to_histogram() else { continue };
            match parachute_window_probability(&h, &pc.window, atm, &pc.speed_of_sound, s.indep - radius, xi) {
                Ok(r) => {
                    db_series.indep.push(s.indep);
                    db_series.probability.push(r.probability);
                }
                Err(e) => errors.push(StageError { stage: "compliance".into(), indep: Some(s.indep), message: e.to_string() }),
            }
        }
        compliance.push(db_series);
        for (m, p, _) in &mc_props {
            let mut series = ComplianceSeries { name: format!("parachute_mc_{m}"), indep: Vec::new(), probability: Vec::new() };
            for s in &p.snapshots {
                let Ok(w) = velocity_windows(&pc.window, atm, &pc.speed_of_sound, s.indep - radius, xi) else { continue };
                let v = active_values(s, vk);
                if v.is_empty() {
                    continue;
                }
                let inside = v.iter().filter(|&&x| x >= w.both.0 && x <= w.both.1).count();
                series.indep.push(s.indep);
                series.probability.push(inside as f64 / v.len() as f64);
            }
            compliance.push(series);
        }
    }

    let mut mc = Vec::new();
    for ((m, p, t_prop), (snaps, t_hist)) in mc_props.into_iter().zip(mc_snaps.into_iter().zip(mc_hist_time)) {
        timings.mc_s.push((m, t_prop, t_hist));
        mc.push(McRun { samples: m, propagation: p, snapshots: snaps });
    }
    timings.total_s = clock.now() - t_begin;
    Ok(RunArtifacts {
        scenario: scenario.clone(),
        options: options.clone(),
        components: comp_names,
        db,
        db_snapshots,
        alpha_log,
        mc,
        comparisons,
        compliance,
        timings,
        errors,
    })
}
