//! Derived quantities (dynamic pressure, stagnation heat rate, Mach number),
//! change of variables for their densities, and compliance probabilities.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::atmosphere::AtmosphereModel;
use crate::dynamics::DynamicsError;
use crate::exec::Executor;
use crate::interpolation::InterpolationMode;
use crate::marginalize::{marginal_1d, Marginal, MarginalConfig, MarginalError, PointCloud};
use crate::metrics::{bin_index, Histogram};
use crate::real::{seed2, Real};

/// Heat-rate constant `K` of the simplified Detra–Kemp–Riddell correlation (W/m²).
pub const DKR_K: f64 = 1.99876e8;
/// Reference nose radius, one foot (m).
pub const FOOT: f64 = 0.3048;
/// Reference velocity of the correlation (m/s), 26 000 ft/s.
pub const DKR_V_REF: f64 = 7924.8;
pub const DKR_EXPONENT: f64 = 3.15;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransformError {
    #[error("speed of sound {0} m/s is not positive at this altitude (outside the fit range)")]
    SpeedOfSound(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Marginal(#[from] MarginalError),
    #[error("the joint marginal must be two-dimensional")]
    NotJoint,
    #[error("every sample was excluded by the map")]
    AllExcluded,
}

/// `q̄ = ½ ρ v²`.
pub fn dynamic_pressure(rho: f64, v: f64) -> f64 {
    0.5 * rho * v * v
}

/// `q̄` with the corrected density `ξ ρ(h)`.
pub fn dynamic_pressure_at(atm: &AtmosphereModel, h: f64, v: f64, xi: f64) -> Result<f64, TransformError> {
    Ok(dynamic_pressure(xi * atm.density(h)?, v))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct HeatRateSpec {
    pub nose_radius_m: f64,
    /// Averaging factor `F̄_q` over the heat-shield surface.
    pub averaging_factor: f64,
    /// Sea-level density of the correlation (kg/m³).
    pub rho_sl_kg_per_m3: f64,
}

impl HeatRateSpec {
    pub fn validate(&self) -> Result<(), TransformError> {
        if !(self.nose_radius_m > 0.0) {
            return Err(TransformError::InvalidParameter("nose radius must be positive"));
        }
        if !(self.averaging_factor > 0.0 && self.averaging_factor <= 1.0) {
            return Err(TransformError::InvalidParameter("averaging factor must lie in (0, 1]"));
        }
        if !(self.rho_sl_kg_per_m3 > 0.0) {
            return Err(TransformError::InvalidParameter("sea-level density must be positive"));
        }
        Ok(())
    }

    /// `Q̇ = F̄_q K sqrt(0.3048/r_n) sqrt(ρ/ρ_SL) (v/7924.8)^3.15`.
    pub fn heat_rate<T: Real>(&self, rho: T, v: T) -> T {
        let geom = libm::sqrt(FOOT / self.nose_radius_m) * self.averaging_factor * DKR_K;
        (rho / self.rho_sl_kg_per_m3).sqrt() * (v / DKR_V_REF).powf(DKR_EXPONENT) * geom
    }
}

pub fn dkr_heat_rate(rho: f64, v: f64, spec: &HeatRateSpec) -> f64 {
    if v <= 0.0 || rho <= 0.0 {
        return 0.0;
    }
    spec.heat_rate(rho, v)
}

/// Cubic speed-of-sound fit `v_s(h) = c0 + c1 h + c2 h² + c3 h³` (m/s, h in m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct SpeedOfSound {
    pub coefficients: [f64; 4],
}

impl SpeedOfSound {
    pub const MARS: SpeedOfSound = SpeedOfSound { coefficients: [223.8, -0.2e-3, -1.588e-8, 1.404e-13] };

    pub fn eval<T: Real>(&self, h: T) -> T {
        let c = self.coefficients;
        ((h * c[3] + c[2]) * h + c[1]) * h + c[0]
    }

    pub fn at(&self, h: f64) -> Result<f64, TransformError> {
        let a = self.eval(h);
        if !(a > 0.0) {
            return Err(TransformError::SpeedOfSound(a));
        }
        Ok(a)
    }
}

pub fn mach(h: f64, v: f64, sos: &SpeedOfSound) -> Result<f64, TransformError> {
    Ok(v / sos.at(h)?)
}

/// Which derived quantity to pair with velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub enum DerivedQuantity {
    DynamicPressure,
    DkrHeatRate { spec: HeatRateSpec },
    Mach { speed_of_sound: SpeedOfSound },
}

impl DerivedQuantity {
    pub fn name(&self) -> &'static str {
        match self {
            DerivedQuantity::DynamicPressure => "dynamic_pressure",
            DerivedQuantity::DkrHeatRate { .. } => "heat_rate",
            DerivedQuantity::Mach { .. } => "mach",
        }
    }
}

/// A smooth map of the plane, evaluated on any [`Real`] so the Jacobian and
/// its derivatives come from automatic differentiation.
pub trait PlaneMap: Sync {
    fn apply<T: Real>(&self, x: [T; 2]) -> Result<[T; 2], TransformError>;
}

/// `(h, v) ↦ (v, q)` for a derived quantity `q(h, v)` at fixed `ξ`.
#[derive(Debug, Clone)]
pub struct AltitudeVelocityMap<'a> {
    pub quantity: DerivedQuantity,
    pub atmosphere: &'a AtmosphereModel,
    pub xi: f64,
}

impl PlaneMap for AltitudeVelocityMap<'_> {
    fn apply<T: Real>(&self, x: [T; 2]) -> Result<[T; 2], TransformError> {
        let [h, v] = x;
        let q = match self.quantity {
            DerivedQuantity::DynamicPressure => self.atmosphere.density(h)? * self.xi * v * v * 0.5,
            DerivedQuantity::DkrHeatRate { spec } => spec.heat_rate(self.atmosphere.density(h)? * self.xi, v),
            DerivedQuantity::Mach { speed_of_sound } => {
                let a = speed_of_sound.eval(h);
                if !(a.value() > 0.0) {
                    return Err(TransformError::SpeedOfSound(a.value()));
                }
                v / a
            }
        };
        Ok([v, q])
    }
}

/// `x ↦ A x + b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap {
    pub a: [[f64; 2]; 2],
    pub b: [f64; 2],
}

impl PlaneMap for AffineMap {
    fn apply<T: Real>(&self, x: [T; 2]) -> Result<[T; 2], TransformError> {
        let a = self.a;
        Ok([x[0] * a[0][0] + x[1] * a[0][1] + self.b[0], x[0] * a[1][0] + x[1] * a[1][1] + self.b[1]])
    }
}

/// Transformed points with `ln n_out = ln n_in − ln|det J|` and, when the
/// input has gradients, `∇_y ln n_out = J⁻ᵀ (∇_x ln n_in − ∇_x ln|det J|)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedCloud {
    /// Flat `(y0, y1)` pairs.
    pub points: Vec<f64>,
    pub log_n: Vec<f64>,
    pub grad_log_n: Option<Vec<f64>>,
    /// Input indices kept, in output order.
    pub kept: Vec<usize>,
    /// Input indices dropped for a singular or undefined map.
    pub excluded: Vec<usize>,
}

/// Smallest `|det J|` accepted.
pub const SINGULAR_DET: f64 = 1e-300;

/// Push density-tagged points through `map`.
pub fn transform_density_2d<M: PlaneMap>(
    points: &[f64],
    log_n: &[f64],
    grad_log_n: Option<&[f64]>,
    map: &M,
) -> TransformedCloud {
    let mut out = TransformedCloud {
        points: Vec::new(),
        log_n: Vec::new(),
        grad_log_n: grad_log_n.map(|_| Vec::new()),
        kept: Vec::new(),
        excluded: Vec::new(),
    };
    for (i, x) in points.chunks_exact(2).enumerate() {
        let Ok(y) = map.apply(seed2(&[x[0], x[1]])) else {
            out.excluded.push(i);
            continue;
        };
        // y[k].v.d[j] = ∂y_k/∂x_j ; y[k].d[j].d[l] = ∂²y_k/∂x_j∂x_l.
        let j = [[y[0].v.d[0], y[0].v.d[1]], [y[1].v.d[0], y[1].v.d[1]]];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if !(libm::fabs(det) >= SINGULAR_DET) || !det.is_finite() {
            out.excluded.push(i);
            continue;
        }
        out.points.extend_from_slice(&[y[0].v.v, y[1].v.v]);
        out.log_n.push(log_n[i] - libm::log(libm::fabs(det)));
        out.kept.push(i);
        if let (Some(g_in), Some(g_out)) = (grad_log_n, out.grad_log_n.as_mut()) {
            let h = |k: usize, a: usize, b: usize| y[k].d[a].d[b];
            // ∂det/∂x_l, then ∂ln|det|/∂x_l = (∂det/∂x_l)/det.
            let mut r = [0.0; 2];
            for (l, rl) in r.iter_mut().enumerate() {
                let dd = h(0, 0, l) * j[1][1] + j[0][0] * h(1, 1, l) - h(0, 1, l) * j[1][0] - j[0][1] * h(1, 0, l);
                *rl = g_in[2 * i + l] - dd / det;
            }
            // Solve Jᵀ g = r.
            let g0 = (j[1][1] * r[0] - j[1][0] * r[1]) / det;
            let g1 = (-j[0][1] * r[0] + j[0][0] * r[1]) / det;
            g_out.extend_from_slice(&[g0, g1]);
        }
    }
    out
}

/// Marginal of a derived quantity, with the samples it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedMarginal {
    pub marginal: Marginal,
    pub cloud: TransformedCloud,
    /// Mass of the joint marginal the samples were read from.
    pub source_mass: f64,
}

/// Marginal of `y1` where `(y0, y1) = map(x)`.
///
/// Each sample `x` (flat pairs on the joint's axes) takes the joint density
/// of its bin; the mapped points carry `n/|det J|` and are binned along
/// `y1` with linear interpolation, since bin values have no gradient.
pub fn derived_marginal<M: PlaneMap, E: Executor>(
    points: &[f64],
    joint: &Marginal,
    map: &M,
    cfg: &MarginalConfig,
    exec: &E,
) -> Result<DerivedMarginal, TransformError> {
    if joint.axes.len() != 2 {
        return Err(TransformError::NotJoint);
    }
    let ny = joint.edges[1].len() - 1;
    let log_n: Vec<f64> = points
        .chunks_exact(2)
        .map(|x| match (bin_index(&joint.edges[0], x[0]), bin_index(&joint.edges[1], x[1])) {
            (Some(i), Some(j)) => libm::log(joint.values[i * ny + j]),
            _ => f64::NEG_INFINITY,
        })
        .collect();
    let cloud = transform_density_2d(points, &log_n, None, map);
    if cloud.kept.is_empty() {
        return Err(TransformError::AllExcluded);
    }
    let pc = PointCloud { dim: 2, points: cloud.points.clone(), log_n: cloud.log_n.clone(), grad_log_n: None };
    let cfg = MarginalConfig { interpolation: InterpolationMode::Linear, ..*cfg };
    let marginal = marginal_1d(&pc, 1, &cfg, None, exec)?;
    Ok(DerivedMarginal { marginal, cloud, source_mass: joint.mass })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub enum Side {
    Above,
    Below,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplianceResult {
    /// Mass in the region of interest divided by the marginal's mass.
    pub probability: f64,
    /// Raw mass in the region, within `[0, total_mass]`.
    pub mass: f64,
    pub total_mass: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Mass of a piecewise-constant density inside `[lo, hi]`, prorating
/// partially covered bins linearly.
pub fn interval_mass(h: &Histogram, lo: f64, hi: f64) -> f64 {
    if !(hi > lo) {
        return 0.0;
    }
    h.edges
        .windows(2)
        .zip(&h.density)
        .map(|(w, p)| {
            let overlap = hi.min(w[1]) - lo.max(w[0]);
            if overlap > 0.0 {
                p * overlap
            } else {
                0.0
            }
        })
        .sum()
}

fn compliance(h: &Histogram, lo: f64, hi: f64) -> ComplianceResult {
    let total = h.mass();
    let mass = interval_mass(h, lo, hi).min(total);
    let probability = if total > 0.0 { (mass / total).clamp(0.0, 1.0) } else { 0.0 };
    ComplianceResult { probability, mass, total_mass: total, lower: lo, upper: hi }
}

/// Probability of lying beyond `threshold` on `side`.
pub fn threshold_probability(h: &Histogram, threshold: f64, side: Side) -> ComplianceResult {
    match side {
        Side::Above => compliance(h, threshold, f64::INFINITY),
        Side::Below => compliance(h, f64::NEG_INFINITY, threshold),
    }
}

/// Deployment constraints for a parachute.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct ParachuteWindow {
    pub dynamic_pressure_min_pa: f64,
    pub dynamic_pressure_max_pa: f64,
    pub mach_min: f64,
    pub mach_max: f64,
}

impl Default for ParachuteWindow {
    fn default() -> Self {
        ParachuteWindow { dynamic_pressure_min_pa: 220.0, dynamic_pressure_max_pa: 880.0, mach_min: 1.2, mach_max: 2.2 }
    }
}

/// Velocity intervals satisfying each constraint at altitude `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityWindows {
    pub dynamic_pressure: (f64, f64),
    pub mach: (f64, f64),
    pub both: (f64, f64),
}

pub fn velocity_windows(
    window: &ParachuteWindow,
    atm: &AtmosphereModel,
    sos: &SpeedOfSound,
    h: f64,
    xi: f64,
) -> Result<VelocityWindows, TransformError> {
    let rho = xi * atm.density(h)?;
    let q = (libm::sqrt(2.0 * window.dynamic_pressure_min_pa / rho), libm::sqrt(2.0 * window.dynamic_pressure_max_pa / rho));
    let a = sos.at(h)?;
    let m = (window.mach_min * a, window.mach_max * a);
    Ok(VelocityWindows { dynamic_pressure: q, mach: m, both: (q.0.max(m.0), q.1.min(m.1)) })
}

/// Probability that the velocity marginal at altitude `h` satisfies both
/// constraints. An empty intersection gives zero.
pub fn parachute_window_probability(
    velocity: &Histogram,
    window: &ParachuteWindow,
    atm: &AtmosphereModel,
    sos: &SpeedOfSound,
    h: f64,
    xi: f64,
) -> Result<ComplianceResult, TransformError> {
    let w = velocity_windows(window, atm, sos, h, xi)?;
    Ok(compliance(velocity, w.both.0, w.both.1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use proptest::prelude::*;
    use rand::Rng;

    fn table1() -> AtmosphereModel {
        AtmosphereModel::Exponential { rho0: 1.215, h1: 8300.0, h2: 0.0 }
    }

    #[test]
    fn dynamic_pressure_examples() {
        assert!((dynamic_pressure(1.215, 100.0) - 6075.0).abs() < 1e-9);
        assert_eq!(dynamic_pressure(1.215, 0.0), 0.0);
        let q = dynamic_pressure_at(&table1(), 8300.0, 100.0, 1.0).unwrap();
        assert!((q - 0.5 * 1.215 * (-1.0f64).exp() * 1e4).abs() < 1e-10);
    }

    #[test]
    fn dkr_examples() {
        let unit = HeatRateSpec { nose_radius_m: FOOT, averaging_factor: 1.0, rho_sl_kg_per_m3: 1.225 };
        assert_eq!(dkr_heat_rate(1.225, DKR_V_REF, &unit), DKR_K);
        assert_eq!(dkr_heat_rate(1.225, 0.0, &unit), 0.0);
        let sphere = HeatRateSpec { nose_radius_m: 1.0, averaging_factor: 0.234, ..unit };
        let q = dkr_heat_rate(1.225, DKR_V_REF, &sphere);
        assert!((q - 0.234 * DKR_K * FOOT.sqrt()).abs() < 1e-6 * q);
        assert!(HeatRateSpec { averaging_factor: 1.5, ..unit }.validate().is_err());
        assert!(HeatRateSpec { nose_radius_m: 0.0, ..unit }.validate().is_err());
    }

    proptest! {
        #[test]
        fn dkr_scaling_laws(rho in 1e-6f64..2.0, v in 10.0f64..9000.0, f in 0.01f64..1.0, rn in 0.05f64..5.0, k in 0.1f64..10.0) {
            let s = HeatRateSpec { nose_radius_m: rn, averaging_factor: f, rho_sl_kg_per_m3: 1.225 };
            let q = dkr_heat_rate(rho, v, &s);
            let qf = dkr_heat_rate(rho, v, &HeatRateSpec { averaging_factor: f / 2.0, ..s });
            prop_assert!((qf - q / 2.0).abs() <= 1e-12 * q);
            let qr = dkr_heat_rate(rho, v, &HeatRateSpec { nose_radius_m: rn * k, ..s });
            prop_assert!((qr - q / k.sqrt()).abs() <= 1e-12 * q);
            let qrho = dkr_heat_rate(rho * k, v, &s);
            prop_assert!((qrho - q * k.sqrt()).abs() <= 1e-12 * qrho.max(q));
            prop_assert!(dkr_heat_rate(rho, v * 1.01, &s) > q);
        }
    }

    #[test]
    fn mach_examples() {
        let s = SpeedOfSound::MARS;
        assert_eq!(mach(0.0, 223.8, &s).unwrap(), 1.0);
        assert_eq!(mach(0.0, 0.0, &s).unwrap(), 0.0);
        let h: f64 = 1e4;
        let vs = 223.8 - 0.2e-3 * 1e4 - 1.588e-8 * 1e8 + 1.404e-13 * 1e12;
        assert!((s.at(h).unwrap() - vs).abs() < 1e-10);
        let bad = SpeedOfSound { coefficients: [-1.0, 0.0, 0.0, 0.0] };
        assert!(matches!(mach(0.0, 1.0, &bad), Err(TransformError::SpeedOfSound(_))));
    }

    fn gaussian_points(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut rng = rng_from_seed(seed);
        let pts: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let c = -libm::log(2.0 * core::f64::consts::PI);
        let ln = pts.chunks(2).map(|p| c - 0.5 * (p[0] * p[0] + p[1] * p[1])).collect();
        let g = pts.iter().map(|v| -v).collect();
        (pts, ln, g)
    }

    #[test]
    fn identity_and_scaling() {
        let (pts, ln, g) = gaussian_points(50, 1);
        let id = AffineMap { a: [[1.0, 0.0], [0.0, 1.0]], b: [0.0; 2] };
        let t = transform_density_2d(&pts, &ln, Some(&g), &id);
        assert_eq!(t.points, pts);
        assert_eq!(t.log_n, ln);
        assert_eq!(t.grad_log_n.as_deref(), Some(g.as_slice()));
        let dbl = AffineMap { a: [[1.0, 0.0], [0.0, 2.0]], b: [0.0; 2] };
        let t2 = transform_density_2d(&pts, &ln, None, &dbl);
        for (a, b) in t2.log_n.iter().zip(&ln) {
            assert!((a.exp() - 0.5 * b.exp()).abs() < 1e-16);
        }
        let sing = AffineMap { a: [[1.0, 2.0], [2.0, 4.0]], b: [0.0; 2] };
        let t3 = transform_density_2d(&pts, &ln, None, &sing);
        assert_eq!(t3.excluded.len(), 50);
    }

    #[test]
    fn linear_map_matches_transformed_gaussian() {
        // y = A x + b with x ~ N(0, I) gives y ~ N(b, A Aᵀ).
        let (pts, ln, g) = gaussian_points(200, 2);
        let m = AffineMap { a: [[2.0, 0.5], [-0.3, 1.2]], b: [1.0, -4.0] };
        let t = transform_density_2d(&pts, &ln, Some(&g), &m);
        let a = m.a;
        let s = [
            [a[0][0] * a[0][0] + a[0][1] * a[0][1], a[0][0] * a[1][0] + a[0][1] * a[1][1]],
            [a[1][0] * a[0][0] + a[1][1] * a[0][1], a[1][0] * a[1][0] + a[1][1] * a[1][1]],
        ];
        let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
        let inv = [[s[1][1] / det, -s[0][1] / det], [-s[1][0] / det, s[0][0] / det]];
        for (k, y) in t.points.chunks(2).enumerate() {
            let d = [y[0] - m.b[0], y[1] - m.b[1]];
            let q = d[0] * (inv[0][0] * d[0] + inv[0][1] * d[1]) + d[1] * (inv[1][0] * d[0] + inv[1][1] * d[1]);
            let exact = -libm::log(2.0 * core::f64::consts::PI) - 0.5 * libm::log(det) - 0.5 * q;
            assert!((t.log_n[k].exp() - exact.exp()).abs() <= 1e-10 * exact.exp());
            let ge = [-(inv[0][0] * d[0] + inv[0][1] * d[1]), -(inv[1][0] * d[0] + inv[1][1] * d[1])];
            let gg = &t.grad_log_n.as_ref().unwrap()[2 * k..2 * k + 2];
            assert!((gg[0] - ge[0]).abs() < 1e-10 && (gg[1] - ge[1]).abs() < 1e-10);
        }
    }

    #[test]
    fn nonlinear_gradient_matches_finite_differences() {
        let atm = table1();
        let map = AltitudeVelocityMap { quantity: DerivedQuantity::DynamicPressure, atmosphere: &atm, xi: 1.0 };
        // ln n_in(h, v) quadratic, so ∇ ln n_out can be differenced in y.
        let lnin = |h: f64, v: f64| -0.5 * ((h - 30e3) / 2e3).powi(2) - 0.5 * ((v - 3e3) / 100.0).powi(2);
        let gin = |h: f64, v: f64| [-(h - 30e3) / 4e6, -(v - 3e3) / 1e4];
        let (h, v) = (31e3, 2950.0);
        let t = transform_density_2d(&[h, v], &[lnin(h, v)], Some(&gin(h, v)), &map);
        let g = t.grad_log_n.unwrap();
        // Inverse map: v = y0, h from q = ½ ρ(h) v².
        let inv = |y0: f64, y1: f64| (8300.0 * libm::log(1.215 * y0 * y0 / (2.0 * y1)), y0);
        let lnout = |y0: f64, y1: f64| {
            let (hh, vv) = inv(y0, y1);
            let tt = transform_density_2d(&[hh, vv], &[lnin(hh, vv)], None, &map);
            tt.log_n[0]
        };
        let (y0, y1) = (t.points[0], t.points[1]);
        let e0 = 1e-3;
        let e1 = 1e-6 * y1;
        let d0 = (lnout(y0 + e0, y1) - lnout(y0 - e0, y1)) / (2.0 * e0);
        let d1 = (lnout(y0, y1 + e1) - lnout(y0, y1 - e1)) / (2.0 * e1);
        assert!((g[0] - d0).abs() < 1e-5 * d0.abs().max(1e-3), "{} {}", g[0], d0);
        assert!((g[1] - d1).abs() < 1e-5 * d1.abs().max(1e-6), "{} {}", g[1], d1);
    }

    #[test]
    fn thresholds() {
        let u = Histogram::new(vec![0.0, 0.5, 1.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(threshold_probability(&u, -1.0, Side::Above).mass, 1.0);
        assert_eq!(threshold_probability(&u, 2.0, Side::Above).mass, 0.0);
        let r = threshold_probability(&u, 0.25, Side::Above);
        assert!((r.mass - 0.75).abs() < 1e-15 && (r.probability - 0.75).abs() < 1e-15);
        assert!((threshold_probability(&u, 0.25, Side::Below).mass - 0.25).abs() < 1e-15);
        let mut last = 1.0;
        for k in 0..=20 {
            let p = threshold_probability(&u, -0.1 + 0.06 * k as f64, Side::Above).probability;
            assert!(p <= last + 1e-15);
            last = p;
        }
    }

    #[test]
    fn parachute_windows() {
        let atm = crate::dynamics::atmosphere::mars_fit();
        let s = SpeedOfSound::MARS;
        let w = velocity_windows(&ParachuteWindow::default(), &atm, &s, 0.0, 1.0).unwrap();
        assert_eq!(w.mach, (1.2 * 223.8, 2.2 * 223.8));
        let (lo, hi) = w.both;
        let inside = Histogram::new(vec![lo + 1.0, hi - 1.0], vec![1.0 / (hi - lo - 2.0)]).unwrap();
        let p = parachute_window_probability(&inside, &ParachuteWindow::default(), &atm, &s, 0.0, 1.0).unwrap();
        assert!((p.probability - 1.0).abs() < 1e-12);
        // Intersection never exceeds either window alone.
        let wide = Histogram::new(vec![100.0, 300.0, 500.0, 700.0], vec![0.001, 0.002, 0.002]).unwrap();
        for h in [0.0, 5e3, 1e4, 2e4] {
            let w = velocity_windows(&ParachuteWindow::default(), &atm, &s, h, 1.0).unwrap();
            let both = parachute_window_probability(&wide, &ParachuteWindow::default(), &atm, &s, h, 1.0).unwrap().probability;
            let tot = wide.mass();
            let pq = interval_mass(&wide, w.dynamic_pressure.0, w.dynamic_pressure.1) / tot;
            let pm = interval_mass(&wide, w.mach.0, w.mach.1) / tot;
            assert!(both <= pq.min(pm) + 1e-15);
        }
        let disjoint = ParachuteWindow { mach_min: 10.0, mach_max: 11.0, ..Default::default() };
        assert_eq!(parachute_window_probability(&wide, &disjoint, &atm, &s, 0.0, 1.0).unwrap().probability, 0.0);
    }

    #[test]
    fn derived_dynamic_pressure_matches_sampled() {
        use crate::exec::Sequential;
        use crate::marginalize::marginal_2d;
        use crate::metrics::hellinger_1d;
        use rand_distr::{Distribution, Normal};
        // Independent h ~ N(30 km, 1 km), v ~ N(3 km/s, 50 m/s).
        let (mh, sh, mv, sv) = (30e3, 1e3, 3e3, 50.0);
        let mut rng = rng_from_seed(5);
        let (nh, nv) = (Normal::new(mh, sh).unwrap(), Normal::new(mv, sv).unwrap());
        let n = 1000;
        let mut pts = Vec::with_capacity(2 * n);
        for _ in 0..n {
            pts.push(nh.sample(&mut rng));
            pts.push(nv.sample(&mut rng));
        }
        let c = -libm::log(2.0 * core::f64::consts::PI * sh * sv);
        let ln: Vec<f64> = pts.chunks(2).map(|p| c - 0.5 * ((p[0] - mh) / sh).powi(2) - 0.5 * ((p[1] - mv) / sv).powi(2)).collect();
        let g: Vec<f64> = pts.chunks(2).flat_map(|p| [-(p[0] - mh) / (sh * sh), -(p[1] - mv) / (sv * sv)]).collect();
        let cloud = PointCloud { dim: 2, points: pts.clone(), log_n: ln, grad_log_n: Some(g) };
        let cfg = MarginalConfig::default();
        let joint = marginal_2d(&cloud, [0, 1], &cfg, None, &Sequential).unwrap();
        let atm = table1();
        let map = AltitudeVelocityMap { quantity: DerivedQuantity::DynamicPressure, atmosphere: &atm, xi: 1.0 };
        let d = derived_marginal(&pts, &joint, &map, &cfg, &Sequential).unwrap();
        assert!(d.cloud.excluded.is_empty());
        // Mass carried over within the volume-rescale tolerance.
        assert!((d.marginal.mass / d.source_mass - 1.0).abs() < 0.1, "{} vs {}", d.marginal.mass, d.source_mass);
        // Shape against q of a large independent sample.
        let mut big = rng_from_seed(6);
        let qs: Vec<f64> = (0..200_000)
            .map(|_| dynamic_pressure(1.215 * libm::exp(-nh.sample(&mut big) / 8300.0), nv.sample(&mut big)))
            .collect();
        let h = d.marginal.to_histogram().unwrap();
        let reference = Histogram::from_samples(&qs, h.edges.clone()).unwrap();
        let hd = hellinger_1d(&h, &reference).unwrap();
        assert!(hd < 0.1, "Hellinger {hd}");
    }
}
