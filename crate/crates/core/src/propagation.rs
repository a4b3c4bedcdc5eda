//! Sampling of the initial density and transport along characteristics.
//!
//! Each sample carries `L = ln n` and `ℓ = ∇ ln n`. Along a characteristic
//! `ẋ = f(x)` they obey
//!
//! ```text
//! dL/ds = −D,            D = ∇·f
//! dℓ/ds = −Jᵀ ℓ − ∇D,    J = ∂f/∂x
//! ```
//!
//! so `n = exp(L)` stays positive and `∇n = n ℓ`.

use alloc::vec::Vec;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{Characteristics, DynamicsError, Flavor, FlowEval};
use crate::exec::Executor;
use crate::integrate::{integrate, Ending, IntegrateError, OdeSystem, Scheme};
use crate::linalg;
use crate::rng::{normal_quantile, rng_from_seed, Sobol, SOBOL_MAX_DIM};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PropagationError {
    #[error("invalid initial distribution: {0}")]
    InvalidDistribution(&'static str),
    #[error("covariance is singular on the uncertain subspace")]
    SingularCovariance,
    #[error("{got} samples given, at least {need} required")]
    TooFewSamples { got: usize, need: usize },
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("state has {got} components, dynamics expect {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("every sample failed to integrate (first failure: {first})")]
    AllFailed { first: IntegrateError },
}

/// Gaussian initial distribution over the augmented state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialDistribution {
    pub mean: Vec<f64>,
    /// Row-major `d × d`.
    pub covariance: Vec<f64>,
    /// `true` for components that carry uncertainty.
    pub uncertain: Vec<bool>,
}

impl InitialDistribution {
    /// Independent components; a zero σ marks the component as fixed.
    pub fn diagonal(mean: &[f64], sigma: &[f64]) -> Self {
        let d = mean.len();
        let mut covariance = alloc::vec![0.0; d * d];
        for i in 0..d {
            covariance[i * d + i] = sigma[i] * sigma[i];
        }
        InitialDistribution { mean: mean.to_vec(), covariance, uncertain: sigma.iter().map(|&s| s != 0.0).collect() }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn uncertain_indices(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&i| self.uncertain[i]).collect()
    }

    pub fn validate(&self) -> Result<(), PropagationError> {
        let d = self.dim();
        if self.covariance.len() != d * d || self.uncertain.len() != d {
            return Err(PropagationError::InvalidDistribution("covariance and mask must match the mean"));
        }
        if self.mean.iter().chain(&self.covariance).any(|v| !v.is_finite()) {
            return Err(PropagationError::InvalidDistribution("non-finite entry"));
        }
        for i in 0..d {
            if self.covariance[i * d + i] < 0.0 {
                return Err(PropagationError::InvalidDistribution("negative variance"));
            }
            for j in 0..i {
                let (a, b) = (self.covariance[i * d + j], self.covariance[j * d + i]);
                if libm::fabs(a - b) > 1e-12 * libm::fabs(a).max(libm::fabs(b)) {
                    return Err(PropagationError::InvalidDistribution("covariance not symmetric"));
                }
            }
            if !self.uncertain[i] && (0..d).any(|j| self.covariance[i * d + j] != 0.0) {
                return Err(PropagationError::InvalidDistribution("fixed component with nonzero covariance"));
            }
        }
        if self.uncertain.iter().all(|&u| !u) {
            return Err(PropagationError::InvalidDistribution("no uncertain component"));
        }
        Ok(())
    }

    /// Density on the uncertain subspace.
    pub fn pdf(&self) -> Result<GaussianPdf, PropagationError> {
        self.validate()?;
        let idx = self.uncertain_indices();
        let k = idx.len();
        let d = self.dim();
        let sub: Vec<f64> = (0..k * k).map(|e| self.covariance[idx[e / k] * d + idx[e % k]]).collect();
        let chol = linalg::cholesky(&sub, k).map_err(|_| PropagationError::SingularCovariance)?;
        let precision = linalg::inverse(&sub, k).map_err(|_| PropagationError::SingularCovariance)?;
        let log_det: f64 = (0..k).map(|i| 2.0 * libm::log(chol[i * k + i])).sum();
        let log_norm = -0.5 * (k as f64 * libm::log(2.0 * core::f64::consts::PI) + log_det);
        Ok(GaussianPdf { dim: d, mean: self.mean.clone(), idx, chol, precision, log_norm })
    }
}

/// Multivariate normal restricted to the uncertain components.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPdf {
    dim: usize,
    mean: Vec<f64>,
    idx: Vec<usize>,
    chol: Vec<f64>,
    precision: Vec<f64>,
    log_norm: f64,
}

impl GaussianPdf {
    pub fn uncertain_dim(&self) -> usize {
        self.idx.len()
    }

    /// `μ + L z` on the uncertain components, mean elsewhere.
    pub fn from_standard(&self, z: &[f64]) -> Vec<f64> {
        let k = self.idx.len();
        let mut x = self.mean.clone();
        for (a, &i) in self.idx.iter().enumerate() {
            x[i] += (0..=a).map(|b| self.chol[a * k + b] * z[b]).sum::<f64>();
        }
        x
    }

    /// `(ln n, ∇ ln n)`; the gradient is zero on fixed components.
    pub fn log_density(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let k = self.idx.len();
        let dx: Vec<f64> = self.idx.iter().map(|&i| x[i] - self.mean[i]).collect();
        let mut grad = alloc::vec![0.0; self.dim];
        let mut quad = 0.0;
        for a in 0..k {
            let p: f64 = (0..k).map(|b| self.precision[a * k + b] * dx[b]).sum();
            quad += dx[a] * p;
            grad[self.idx[a]] = -p;
        }
        (self.log_norm - 0.5 * quad, grad)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub enum SamplingMode {
    #[default]
    PseudoRandom,
    /// Scrambled Sobol points through the normal quantile.
    LowDiscrepancy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleStatus {
    Active,
    /// Reached the terminal event; state frozen there.
    Terminated,
    /// Integration failed; state frozen at the last good output.
    Failed,
}

/// A point of the ensemble with its log-density and log-density gradient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensitySample {
    pub state: Vec<f64>,
    /// `ln n`; `-∞` for samples without density (Monte Carlo).
    pub log_n: f64,
    /// `∇ ln n`; empty for samples without density.
    pub grad_log_n: Vec<f64>,
    pub status: SampleStatus,
}

impl DensitySample {
    pub fn without_density(state: Vec<f64>) -> Self {
        DensitySample { state, log_n: f64::NEG_INFINITY, grad_log_n: Vec::new(), status: SampleStatus::Active }
    }

    pub fn n(&self) -> f64 {
        libm::exp(self.log_n)
    }

    pub fn grad_n(&self) -> Vec<f64> {
        let n = self.n();
        self.grad_log_n.iter().map(|g| n * g).collect()
    }

    pub fn is_active(&self) -> bool {
        self.status == SampleStatus::Active
    }
}

/// Draw `count` samples with their initial density and gradient.
pub fn sample_initial(
    dist: &InitialDistribution,
    count: usize,
    seed: u64,
    mode: SamplingMode,
) -> Result<Vec<DensitySample>, PropagationError> {
    let pdf = dist.pdf()?;
    let need = dist.dim() + 1;
    if count < need {
        return Err(PropagationError::TooFewSamples { got: count, need });
    }
    let k = pdf.uncertain_dim();
    let mut z = alloc::vec![0.0; k];
    let mut out = Vec::with_capacity(count);
    let mut draw: alloc::boxed::Box<dyn FnMut(&mut [f64])> = match mode {
        SamplingMode::PseudoRandom => {
            let mut rng = rng_from_seed(seed);
            alloc::boxed::Box::new(move |z: &mut [f64]| z.iter_mut().for_each(|v| *v = StandardNormal.sample(&mut rng)))
        }
        SamplingMode::LowDiscrepancy => {
            if k > SOBOL_MAX_DIM {
                return Err(PropagationError::InvalidDistribution("too many uncertain components for Sobol sampling"));
            }
            let mut sob = Sobol::scrambled(k, seed);
            alloc::boxed::Box::new(move |z: &mut [f64]| {
                sob.next_point(z);
                z.iter_mut().for_each(|v| *v = normal_quantile(*v));
            })
        }
    };
    for _ in 0..count {
        draw(&mut z);
        let state = pdf.from_standard(&z);
        let (log_n, grad_log_n) = pdf.log_density(&state);
        out.push(DensitySample { state, log_n, grad_log_n, status: SampleStatus::Active });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub scheme: Scheme,
    /// Initial value of the independent variable.
    pub start: f64,
    /// Final value; integration also stops at the dynamics' terminal event.
    pub end: f64,
    /// Snapshot values, strictly monotone from `start` towards `end`.
    pub schedule: Vec<f64>,
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<(), PropagationError> {
        let dir = if self.end >= self.start { 1.0 } else { -1.0 };
        if !(self.start.is_finite() && self.end.is_finite()) || self.start == self.end {
            return Err(PropagationError::InvalidConfig("start and end must be finite and distinct"));
        }
        match self.scheme {
            Scheme::Rk4 { step } if !(step > 0.0) => return Err(PropagationError::InvalidConfig("RK4 step must be positive")),
            Scheme::Rk45 { atol, rtol } if !(atol > 0.0 && rtol > 0.0) => {
                return Err(PropagationError::InvalidConfig("tolerances must be positive"))
            }
            _ => {}
        }
        if self.schedule.is_empty() {
            return Err(PropagationError::InvalidConfig("empty snapshot schedule"));
        }
        if self.schedule.windows(2).any(|w| !((w[1] - w[0]) * dir > 0.0)) {
            return Err(PropagationError::InvalidConfig("snapshot schedule must be strictly monotone"));
        }
        let inside = |s: f64| (s - self.start) * dir >= 0.0 && (self.end - s) * dir >= 0.0;
        if !self.schedule.iter().all(|&s| inside(s)) {
            return Err(PropagationError::InvalidConfig("snapshot outside [start, end]"));
        }
        Ok(())
    }
}

/// The ensemble at one value of the independent variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub indep: f64,
    pub flavor: Flavor,
    pub has_density: bool,
    pub samples: Vec<DensitySample>,
}

impl Snapshot {
    pub fn dim(&self) -> usize {
        self.flavor.dim()
    }

    pub fn active(&self) -> impl Iterator<Item = &DensitySample> {
        self.samples.iter().filter(|s| s.is_active())
    }

    pub fn active_count(&self) -> usize {
        self.active().count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleFailure {
    pub index: usize,
    pub error: IntegrateError,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Propagation {
    pub snapshots: Vec<Snapshot>,
    /// Terminal-event value of the independent variable per sample.
    pub terminal: Vec<Option<f64>>,
    pub failures: Vec<SampleFailure>,
}

/// State, optionally augmented with `(ln n, ∇ ln n)`.
struct Transport<'a, C: ?Sized> {
    dynamics: &'a C,
    d: usize,
    density: bool,
    flow: FlowEval,
}

impl<C: Characteristics + ?Sized> OdeSystem for Transport<'_, C> {
    fn dim(&self) -> usize {
        if self.density {
            2 * self.d + 1
        } else {
            self.d
        }
    }

    fn controlled(&self) -> usize {
        self.d
    }

    fn eval(&mut self, s: f64, y: &[f64], dy: &mut [f64]) -> Result<(), DynamicsError> {
        let d = self.d;
        if !self.density {
            return self.dynamics.rates(s, y, dy);
        }
        self.dynamics.rates_full(s, &y[..d], &mut self.flow)?;
        dy[..d].copy_from_slice(&self.flow.rates);
        dy[d] = -self.flow.divergence;
        let ell = &y[d + 1..];
        for i in 0..d {
            let mut acc = -self.flow.divergence_grad[i];
            for j in 0..d {
                acc -= self.flow.jacobian[j * d + i] * ell[j];
            }
            dy[d + 1 + i] = acc;
        }
        Ok(())
    }

    fn stop(&self, s: f64, y: &[f64]) -> Option<f64> {
        self.dynamics.stop_value(s, &y[..self.d])
    }
}

struct Track {
    records: Vec<Option<Vec<f64>>>,
    ending: Result<Ending, IntegrateError>,
}

fn track<C: Characteristics + ?Sized>(dynamics: &C, y0: Vec<f64>, cfg: &IntegratorConfig, density: bool) -> Track {
    let d = dynamics.dim();
    let mut sys = Transport { dynamics, d, density, flow: FlowEval::zeros(d) };
    let mut records = alloc::vec![None; cfg.schedule.len()];
    let ending = integrate(&mut sys, &y0, cfg.start, cfg.end, &cfg.schedule, cfg.scheme, |k, y| {
        records[k] = Some(y.to_vec());
    })
    .map(|o| o.ending);
    Track { records, ending }
}

fn unpack(y: &[f64], d: usize, density: bool, status: SampleStatus) -> DensitySample {
    if density {
        DensitySample { state: y[..d].to_vec(), log_n: y[d], grad_log_n: y[d + 1..].to_vec(), status }
    } else {
        DensitySample { state: y[..d].to_vec(), log_n: f64::NEG_INFINITY, grad_log_n: Vec::new(), status }
    }
}

fn run<C: Characteristics + ?Sized, E: Executor>(
    initial: &[Vec<f64>],
    dynamics: &C,
    cfg: &IntegratorConfig,
    exec: &E,
    density: bool,
) -> Result<Propagation, PropagationError> {
    cfg.validate()?;
    let d = dynamics.dim();
    if let Some(bad) = initial.iter().find(|y| y.len() != if density { 2 * d + 1 } else { d }) {
        return Err(PropagationError::DimensionMismatch { got: bad.len(), expected: d });
    }
    let tracks = exec.map(initial, |_, y0| track(dynamics, y0.clone(), cfg, density));

    let mut failures = Vec::new();
    let mut terminal = Vec::with_capacity(tracks.len());
    for (i, t) in tracks.iter().enumerate() {
        match &t.ending {
            Ok(Ending::Event { s, .. }) => terminal.push(Some(*s)),
            Ok(Ending::Completed) => terminal.push(None),
            Err(e) => {
                log::debug!("sample {i} failed: {e}");
                failures.push(SampleFailure { index: i, error: *e });
                terminal.push(None);
            }
        }
    }
    if !tracks.is_empty() && failures.len() == tracks.len() {
        return Err(PropagationError::AllFailed { first: failures[0].error });
    }

    let snapshots = cfg
        .schedule
        .iter()
        .enumerate()
        .map(|(k, &s)| {
            let samples = tracks
                .iter()
                .zip(initial)
                .map(|(t, y0)| {
                    if let Some(y) = &t.records[k] {
                        return unpack(y, d, density, SampleStatus::Active);
                    }
                    match &t.ending {
                        Ok(Ending::Event { y, .. }) => unpack(y, d, density, SampleStatus::Terminated),
                        _ => {
                            let last = t.records[..k].iter().rev().flatten().next().unwrap_or(y0);
                            unpack(last, d, density, SampleStatus::Failed)
                        }
                    }
                })
                .collect();
            Snapshot { indep: s, flavor: dynamics.flavor(), has_density: density, samples }
        })
        .collect();
    Ok(Propagation { snapshots, terminal, failures })
}

/// Transport states, log-densities and log-density gradients.
pub fn propagate_continuum<C: Characteristics + ?Sized, E: Executor>(
    samples: &[DensitySample],
    dynamics: &C,
    cfg: &IntegratorConfig,
    exec: &E,
) -> Result<Propagation, PropagationError> {
    let d = dynamics.dim();
    let initial: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| {
            let mut y = s.state.clone();
            y.push(s.log_n);
            if s.grad_log_n.len() == d {
                y.extend_from_slice(&s.grad_log_n);
            }
            y
        })
        .collect();
    run(&initial, dynamics, cfg, exec, true)
}

/// Transport states only (Monte Carlo baseline).
pub fn propagate_mc<C: Characteristics + ?Sized, E: Executor>(
    states: &[Vec<f64>],
    dynamics: &C,
    cfg: &IntegratorConfig,
    exec: &E,
) -> Result<Propagation, PropagationError> {
    run(states, dynamics, cfg, exec, false)
}
