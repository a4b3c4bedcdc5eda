//! Distances between one- and two-dimensional distributions, and moment
//! summaries.
//!
//! Binned distributions are piecewise-constant densities. Comparisons between
//! different grids first rebin both onto the union of their edges, which
//! conserves mass exactly, then normalize each to unit mass.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("both distributions have zero mass")]
    BothEmpty,
    #[error("distribution has zero mass")]
    ZeroMass,
    #[error("empty input")]
    Empty,
    #[error("bin edges must be strictly increasing with one more edge than values")]
    BadEdges,
    #[error("negative or non-finite density")]
    BadDensity,
}

/// Piecewise-constant density on `edges`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub density: Vec<f64>,
}

fn check_edges(edges: &[f64], n: usize) -> Result<(), MetricError> {
    if edges.len() != n + 1 || n == 0 || edges.windows(2).any(|w| !(w[1] > w[0])) || !edges.iter().all(|e| e.is_finite()) {
        return Err(MetricError::BadEdges);
    }
    Ok(())
}

impl Histogram {
    pub fn new(edges: Vec<f64>, density: Vec<f64>) -> Result<Self, MetricError> {
        check_edges(&edges, density.len())?;
        if density.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(MetricError::BadDensity);
        }
        Ok(Histogram { edges, density })
    }

    /// Normalized histogram of `samples` on `edges`; samples outside are
    /// dropped, the last bin is closed.
    pub fn from_samples(samples: &[f64], edges: Vec<f64>) -> Result<Self, MetricError> {
        let n = edges.len().saturating_sub(1);
        check_edges(&edges, n)?;
        if samples.is_empty() {
            return Err(MetricError::Empty);
        }
        let mut counts = alloc::vec![0.0; n];
        for &x in samples {
            if let Some(i) = bin_index(&edges, x) {
                counts[i] += 1.0;
            }
        }
        let total = samples.len() as f64;
        let density = counts.iter().zip(edges.windows(2)).map(|(c, w)| c / (total * (w[1] - w[0]))).collect();
        Ok(Histogram { edges, density })
    }

    pub fn mass(&self) -> f64 {
        self.density.iter().zip(self.edges.windows(2)).map(|(p, w)| p * (w[1] - w[0])).sum()
    }

    pub fn widths(&self) -> impl Iterator<Item = f64> + '_ {
        self.edges.windows(2).map(|w| w[1] - w[0])
    }

    /// Mass-conserving rebin onto `edges`, which must refine this grid's
    /// edges inside its support.
    pub fn rebin(&self, edges: &[f64]) -> Vec<f64> {
        edges
            .windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                bin_index(&self.edges, mid).map_or(0.0, |i| self.density[i])
            })
            .collect()
    }
}

/// Bin containing `x`: half-open `[e_i, e_{i+1})` except the closed last bin.
pub fn bin_index(edges: &[f64], x: f64) -> Option<usize> {
    let n = edges.len() - 1;
    if !(x >= edges[0] && x <= edges[n]) {
        return None;
    }
    Some(edges.partition_point(|&e| e <= x).saturating_sub(1).min(n - 1))
}

/// Sorted union of two edge sets.
pub fn union_edges(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut u: Vec<f64> = a.iter().chain(b).copied().collect();
    u.sort_by(f64::total_cmp);
    u.dedup();
    u
}

/// `Δ_H = sqrt(½ ∫ (√p − √q)²)` between the normalized densities.
pub fn hellinger_1d(p: &Histogram, q: &Histogram) -> Result<f64, MetricError> {
    let grid = union_edges(&p.edges, &q.edges);
    let widths: Vec<f64> = grid.windows(2).map(|w| w[1] - w[0]).collect();
    hellinger_on_grid(&p.rebin(&grid), &q.rebin(&grid), &widths)
}

fn hellinger_on_grid(p: &[f64], q: &[f64], measure: &[f64]) -> Result<f64, MetricError> {
    let mp: f64 = p.iter().zip(measure).map(|(a, w)| a * w).sum();
    let mq: f64 = q.iter().zip(measure).map(|(a, w)| a * w).sum();
    match (mp > 0.0, mq > 0.0) {
        (false, false) => return Err(MetricError::BothEmpty),
        (true, true) => {}
        _ => return Ok(1.0),
    }
    let bc: f64 = p.iter().zip(q).zip(measure).map(|((a, b), w)| libm::sqrt(a / mp * b / mq) * w).sum();
    // ½∫(√p − √q)² = 1 − ∫√(pq) for unit masses.
    Ok(libm::sqrt((1.0 - bc).clamp(0.0, 1.0)))
}

/// Piecewise-constant density on a rectangular grid, row-major with the
/// first axis slowest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram2d {
    pub edges: [Vec<f64>; 2],
    pub density: Vec<f64>,
}

impl Histogram2d {
    pub fn new(edges: [Vec<f64>; 2], density: Vec<f64>) -> Result<Self, MetricError> {
        let (nx, ny) = (edges[0].len().saturating_sub(1), edges[1].len().saturating_sub(1));
        check_edges(&edges[0], nx)?;
        check_edges(&edges[1], ny)?;
        if density.len() != nx * ny {
            return Err(MetricError::BadEdges);
        }
        if density.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(MetricError::BadDensity);
        }
        Ok(Histogram2d { edges, density })
    }

    pub fn from_samples(x: &[f64], y: &[f64], edges: [Vec<f64>; 2]) -> Result<Self, MetricError> {
        let (nx, ny) = (edges[0].len().saturating_sub(1), edges[1].len().saturating_sub(1));
        check_edges(&edges[0], nx)?;
        check_edges(&edges[1], ny)?;
        if x.is_empty() {
            return Err(MetricError::Empty);
        }
        let mut counts = alloc::vec![0.0; nx * ny];
        for (&a, &b) in x.iter().zip(y) {
            if let (Some(i), Some(j)) = (bin_index(&edges[0], a), bin_index(&edges[1], b)) {
                counts[i * ny + j] += 1.0;
            }
        }
        let total = x.len() as f64;
        let mut density = counts;
        for i in 0..nx {
            for j in 0..ny {
                let area = (edges[0][i + 1] - edges[0][i]) * (edges[1][j + 1] - edges[1][j]);
                density[i * ny + j] /= total * area;
            }
        }
        Ok(Histogram2d { edges, density })
    }

    pub fn mass(&self) -> f64 {
        let ny = self.edges[1].len() - 1;
        self.density
            .iter()
            .enumerate()
            .map(|(k, p)| p * (self.edges[0][k / ny + 1] - self.edges[0][k / ny]) * (self.edges[1][k % ny + 1] - self.edges[1][k % ny]))
            .sum()
    }

    fn rebin(&self, gx: &[f64], gy: &[f64]) -> Vec<f64> {
        let ny = self.edges[1].len() - 1;
        let mut out = Vec::with_capacity((gx.len() - 1) * (gy.len() - 1));
        for wx in gx.windows(2) {
            let i = bin_index(&self.edges[0], 0.5 * (wx[0] + wx[1]));
            for wy in gy.windows(2) {
                let j = bin_index(&self.edges[1], 0.5 * (wy[0] + wy[1]));
                out.push(match (i, j) {
                    (Some(i), Some(j)) => self.density[i * ny + j],
                    _ => 0.0,
                });
            }
        }
        out
    }

    /// Integrate out one axis, leaving the marginal along `keep`.
    pub fn marginal(&self, keep: usize) -> Histogram {
        let (nx, ny) = (self.edges[0].len() - 1, self.edges[1].len() - 1);
        let mut out = alloc::vec![0.0; if keep == 0 { nx } else { ny }];
        for i in 0..nx {
            for j in 0..ny {
                let p = self.density[i * ny + j];
                if keep == 0 {
                    out[i] += p * (self.edges[1][j + 1] - self.edges[1][j]);
                } else {
                    out[j] += p * (self.edges[0][i + 1] - self.edges[0][i]);
                }
            }
        }
        Histogram { edges: self.edges[keep].clone(), density: out }
    }
}

pub fn hellinger_2d(p: &Histogram2d, q: &Histogram2d) -> Result<f64, MetricError> {
    let gx = union_edges(&p.edges[0], &q.edges[0]);
    let gy = union_edges(&p.edges[1], &q.edges[1]);
    let mut measure = Vec::with_capacity((gx.len() - 1) * (gy.len() - 1));
    for wx in gx.windows(2) {
        for wy in gy.windows(2) {
            measure.push((wx[1] - wx[0]) * (wy[1] - wy[0]));
        }
    }
    hellinger_on_grid(&p.rebin(&gx, &gy), &q.rebin(&gx, &gy), &measure)
}

/// A cumulative distribution function that is linear between knots and may
/// jump at them. Covers empirical (pure jumps) and binned (continuous)
/// distributions alike.
#[derive(Debug, Clone, PartialEq)]
pub struct Cdf {
    /// Strictly increasing knot positions.
    pub x: Vec<f64>,
    /// Value just before each knot.
    pub left: Vec<f64>,
    /// Value just after each knot.
    pub right: Vec<f64>,
}

impl Cdf {
    pub fn from_samples(samples: &[f64]) -> Result<Self, MetricError> {
        if samples.is_empty() {
            return Err(MetricError::Empty);
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(MetricError::BadDensity);
        }
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        let step = 1.0 / s.len() as f64;
        let (mut x, mut left, mut right) = (Vec::new(), Vec::new(), Vec::new());
        let mut acc = 0usize;
        let mut i = 0;
        while i < s.len() {
            let mut j = i;
            while j < s.len() && s[j] == s[i] {
                j += 1;
            }
            x.push(s[i]);
            left.push(acc as f64 * step);
            acc = j;
            right.push(acc as f64 * step);
            i = j;
        }
        Ok(Cdf { x, left, right })
    }

    /// Normalized CDF of a histogram.
    pub fn from_histogram(h: &Histogram) -> Result<Self, MetricError> {
        let m = h.mass();
        if !(m > 0.0) {
            return Err(MetricError::ZeroMass);
        }
        let mut f = Vec::with_capacity(h.edges.len());
        let mut acc = 0.0;
        f.push(0.0);
        for (p, w) in h.density.iter().zip(h.widths()) {
            acc += p * w / m;
            f.push(acc);
        }
        *f.last_mut().unwrap() = 1.0;
        Ok(Cdf { x: h.edges.clone(), left: f.clone(), right: f })
    }

    /// Value at `x`, right-continuous.
    pub fn eval(&self, x: f64) -> f64 {
        let k = self.x.partition_point(|&v| v <= x);
        if k == 0 {
            0.0
        } else if k == self.x.len() {
            1.0
        } else {
            let (x0, x1) = (self.x[k - 1], self.x[k]);
            self.right[k - 1] + (self.left[k] - self.right[k - 1]) * (x - x0) / (x1 - x0)
        }
    }

    fn eval_left(&self, x: f64) -> f64 {
        match self.x.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(k) => self.left[k],
            Err(_) => self.eval(x),
        }
    }
}

/// `∫ |a − b|` over `[x0, x1]` for linear functions with the given end values.
fn abs_linear_integral(a0: f64, a1: f64, x0: f64, x1: f64) -> f64 {
    let w = x1 - x0;
    if a0 * a1 >= 0.0 {
        0.5 * w * (libm::fabs(a0) + libm::fabs(a1))
    } else {
        let t = a0 / (a0 - a1);
        0.5 * w * (t * libm::fabs(a0) + (1.0 - t) * libm::fabs(a1))
    }
}

/// `Δ_W = ∫ |F_P − F_Q| dx`, exact for piecewise-linear CDFs.
pub fn wasserstein1(p: &Cdf, q: &Cdf) -> f64 {
    let knots = union_edges(&p.x, &q.x);
    knots
        .windows(2)
        .map(|w| {
            // Right limit at the left end, left limit at the right end.
            let a0 = p.eval(w[0]) - q.eval(w[0]);
            let a1 = p.eval_left(w[1]) - q.eval_left(w[1]);
            abs_linear_integral(a0, a1, w[0], w[1])
        })
        .sum()
}

pub fn wasserstein1_1d(p: &Histogram, q: &Histogram) -> Result<f64, MetricError> {
    Ok(wasserstein1(&Cdf::from_histogram(p)?, &Cdf::from_histogram(q)?))
}

pub fn wasserstein1_samples(p: &[f64], q: &[f64]) -> Result<f64, MetricError> {
    Ok(wasserstein1(&Cdf::from_samples(p)?, &Cdf::from_samples(q)?))
}

/// Equal-size empirical inputs: `mean |x_(i) − y_(i)|` over sorted samples.
pub fn wasserstein1_sorted(p: &[f64], q: &[f64]) -> Result<f64, MetricError> {
    if p.is_empty() || p.len() != q.len() {
        return Err(MetricError::Empty);
    }
    let (mut a, mut b) = (p.to_vec(), q.to_vec());
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    Ok(a.iter().zip(&b).map(|(x, y)| libm::fabs(x - y)).sum::<f64>() / a.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub std: f64,
}

/// Mean and standard deviation of the normalized histogram; each bin
/// contributes its own uniform spread `w²/12`.
pub fn moments_histogram(h: &Histogram) -> Result<Moments, MetricError> {
    let m = h.mass();
    if !(m > 0.0) {
        return Err(MetricError::ZeroMass);
    }
    let (mut s1, mut s2) = (0.0, 0.0);
    for (p, w) in h.density.iter().zip(h.edges.windows(2)) {
        let (a, b) = (w[0], w[1]);
        let mass = p * (b - a) / m;
        let c = 0.5 * (a + b);
        s1 += mass * c;
        s2 += mass * (c * c + (b - a) * (b - a) / 12.0);
    }
    Ok(Moments { mean: s1, std: libm::sqrt((s2 - s1 * s1).max(0.0)) })
}

/// Sample mean and (unbiased) standard deviation.
pub fn moments_samples(x: &[f64]) -> Result<Moments, MetricError> {
    if x.len() < 2 {
        return Err(MetricError::Empty);
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Ok(Moments { mean, std: libm::sqrt(var) })
}

/// `(value − reference) / |reference|`.
pub fn relative_difference(value: f64, reference: f64) -> f64 {
    if value == reference {
        0.0
    } else {
        (value - reference) / libm::fabs(reference)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentDifference {
    pub mean: f64,
    pub std: f64,
}

pub fn moment_difference(value: &Moments, reference: &Moments) -> MomentDifference {
    MomentDifference { mean: relative_difference(value.mean, reference.mean), std: relative_difference(value.std, reference.std) }
}

/// Per-snapshot distance series with its mean and standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub indep: Vec<f64>,
    pub hellinger: Vec<f64>,
    /// Δ_W in axis units.
    pub wasserstein: Vec<f64>,
    /// Δ_W over the reference standard deviation, comparable across snapshots.
    pub wasserstein_normalized: Vec<f64>,
    pub hellinger_summary: Summary,
    /// Summary of the normalized series.
    pub wasserstein_summary: Summary,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

/// Mean and population standard deviation of the finite entries.
pub fn summarize(x: &[f64]) -> Summary {
    let v: Vec<f64> = x.iter().copied().filter(|v| v.is_finite()).collect();
    if v.is_empty() {
        return Summary { mean: f64::NAN, std: f64::NAN };
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    Summary { mean, std: libm::sqrt(v.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n) }
}

impl DistanceReport {
    /// `reference_std` normalizes Δ_W per snapshot; a zero spread leaves it unscaled.
    pub fn new(indep: Vec<f64>, hellinger: Vec<f64>, wasserstein: Vec<f64>, reference_std: &[f64]) -> Self {
        let wasserstein_normalized: Vec<f64> =
            wasserstein.iter().zip(reference_std).map(|(&w, &s)| if s > 0.0 { w / s } else { w }).collect();
        let (hs, ws) = (summarize(&hellinger), summarize(&wasserstein_normalized));
        DistanceReport {
            indep,
            hellinger,
            wasserstein,
            wasserstein_normalized,
            hellinger_summary: hs,
            wasserstein_summary: ws,
        }
    }
}

/// Δ_W between binned distributions, normalized by the reference spread.
pub fn normalized_wasserstein(p: &Histogram, reference: &Histogram) -> Result<f64, MetricError> {
    let w = wasserstein1_1d(p, reference)?;
    let s = moments_histogram(reference)?.std;
    Ok(if s > 0.0 { w / s } else { w })
}
