//! Choosing α: k-fold cross-validation scored by containment and kept
//! volume, minimized with differential evolution; nearest-neighbour
//! heuristics as a cheap alternative.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Executor;
use crate::geometry::{delaunay, GeometryError, Triangulation, NONE};
use crate::rng::{rng_from_seed, streams, sub_seed};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AlphaError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("every fold was degenerate")]
    AllFoldsDegenerate,
    #[error("no α in the search bounds was feasible")]
    NoFeasibleAlpha,
    #[error("all points coincide; nearest-neighbour distance is zero")]
    ZeroDistance,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct CrossValConfig {
    pub folds: usize,
    /// Also reject when a held-out point lies outside the convex hull of its
    /// training set. Such points cannot be contained at any α, so by default
    /// they are ignored.
    pub reject_outside_hull: bool,
    pub seed: u64,
}

impl Default for CrossValConfig {
    fn default() -> Self {
        CrossValConfig { folds: 5, reject_outside_hull: false, seed: 0 }
    }
}

impl CrossValConfig {
    pub fn validate(&self, n: usize, d: usize) -> Result<(), AlphaError> {
        if self.folds < 2 {
            return Err(AlphaError::InvalidConfig("need at least 2 folds"));
        }
        if self.folds > n / (d + 2) {
            return Err(AlphaError::InvalidConfig("too many folds for the number of points"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct DeConfig {
    pub population: usize,
    pub generations: usize,
    pub mutation: f64,
    pub recombination: f64,
    /// `None` derives bounds from the nearest-neighbour distances.
    pub bounds: Option<(f64, f64)>,
}

impl Default for DeConfig {
    fn default() -> Self {
        DeConfig { population: 40, generations: 60, mutation: 0.5, recombination: 0.7, bounds: None }
    }
}

impl DeConfig {
    pub fn validate(&self) -> Result<(), AlphaError> {
        if self.population < 4 {
            return Err(AlphaError::InvalidConfig("population must be at least 4"));
        }
        if !(self.mutation > 0.0 && self.mutation < 2.0) {
            return Err(AlphaError::InvalidConfig("mutation must lie in (0, 2)"));
        }
        if !(0.0..=1.0).contains(&self.recombination) {
            return Err(AlphaError::InvalidConfig("recombination must lie in [0, 1]"));
        }
        if let Some((lo, hi)) = self.bounds {
            if !(lo > 0.0 && hi > lo && hi.is_finite()) {
                return Err(AlphaError::InvalidConfig("bounds must satisfy 0 < min < max < inf"));
            }
        }
        Ok(())
    }
}

struct Fold {
    sigma_sorted: Vec<f64>,
    /// `prefix[k]` is the volume of the `k` smallest-radius simplices.
    prefix: Vec<f64>,
    /// Smallest α admitting every held-out point.
    threshold: f64,
}

/// Cached folds: each α is then scored in `O(K log S)`.
pub struct CrossValidator {
    folds: Vec<Fold>,
    pub skipped: usize,
}

/// Smallest circumradius among the simplices containing `x`, `None` outside
/// the hull.
fn containment_radius(tri: &Triangulation, x: &[f64], hint: &mut Option<usize>) -> Option<f64> {
    let (k, lam) = tri.locate(x, *hint)?;
    *hint = Some(k);
    let d = tri.dim;
    let mut best = tri.circumradius[k];
    // A point on a shared face belongs to the neighbour too.
    for (j, &l) in lam.iter().enumerate() {
        if l <= crate::geometry::delaunay::INSIDE_TOL {
            let nb = tri.neighbors[k * (d + 1) + j];
            if nb != NONE && tri.circumradius[nb] < best {
                if let Ok(l2) = crate::geometry::barycentric(&tri.simplex_points(nb), x) {
                    if l2.iter().all(|&v| v >= -crate::geometry::delaunay::INSIDE_TOL) {
                        best = tri.circumradius[nb];
                    }
                }
            }
        }
    }
    Some(best)
}

impl CrossValidator {
    /// Split flat `points` into folds and triangulate each training set.
    pub fn new<E: Executor>(points: &[f64], d: usize, cfg: &CrossValConfig, exec: &E) -> Result<Self, AlphaError> {
        let n = points.len() / d;
        cfg.validate(n, d)?;
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng_from_seed(sub_seed(cfg.seed, streams::CV_FOLDS)));
        let ks: Vec<usize> = (0..cfg.folds).collect();
        let built = exec.map(&ks, |_, &f| {
            let (mut train, mut test) = (Vec::new(), Vec::new());
            for (pos, &i) in order.iter().enumerate() {
                let dst = if pos % cfg.folds == f { &mut test } else { &mut train };
                dst.extend_from_slice(&points[i * d..(i + 1) * d]);
            }
            let tri = delaunay(&train, d)?;
            let mut threshold = 0.0f64;
            let mut hint = None;
            for x in test.chunks_exact(d) {
                match containment_radius(&tri, x, &mut hint) {
                    Some(r) => threshold = threshold.max(r),
                    None if cfg.reject_outside_hull => threshold = f64::INFINITY,
                    None => {}
                }
            }
            let mut idx: Vec<usize> = (0..tri.len()).collect();
            idx.sort_by(|&a, &b| tri.circumradius[a].total_cmp(&tri.circumradius[b]));
            let mut prefix = Vec::with_capacity(idx.len() + 1);
            prefix.push(0.0);
            let mut acc = 0.0;
            for &k in &idx {
                acc += tri.volume[k];
                prefix.push(acc);
            }
            Ok::<_, GeometryError>(Fold { sigma_sorted: idx.iter().map(|&k| tri.circumradius[k]).collect(), prefix, threshold })
        });
        let mut folds = Vec::new();
        let mut skipped = 0;
        for (f, r) in built.into_iter().enumerate() {
            match r {
                Ok(fold) => folds.push(fold),
                Err(e) => {
                    log::warn!("cross-validation fold {f} skipped: {e}");
                    skipped += 1;
                }
            }
        }
        if folds.is_empty() {
            return Err(AlphaError::AllFoldsDegenerate);
        }
        Ok(CrossValidator { folds, skipped })
    }

    /// Mean kept volume over folds, `+∞` if any fold leaves a held-out point
    /// outside its α-shape.
    pub fn score(&self, alpha: f64) -> f64 {
        let mut total = 0.0;
        for f in &self.folds {
            if !(alpha > f.threshold) {
                return f64::INFINITY;
            }
            let kept = if alpha == f64::INFINITY { f.sigma_sorted.len() } else { f.sigma_sorted.partition_point(|&s| s < alpha) };
            total += f.prefix[kept];
        }
        total / self.folds.len() as f64
    }

    /// Largest per-fold containment threshold; every α at or below it is
    /// rejected.
    pub fn rejection_bound(&self) -> f64 {
        self.folds.iter().map(|f| f.threshold).fold(0.0, f64::max)
    }
}

/// One-shot [`CrossValidator`] score.
pub fn cv_score<E: Executor>(points: &[f64], d: usize, alpha: f64, cfg: &CrossValConfig, exec: &E) -> Result<f64, AlphaError> {
    Ok(CrossValidator::new(points, d, cfg, exec)?.score(alpha))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeResult {
    pub x: Vec<f64>,
    pub score: f64,
    /// Best score after initialization and after each generation.
    pub history: Vec<f64>,
    pub evaluations: usize,
}

/// Differential evolution, `best/1/bin`, with uniform initialization inside
/// `bounds` and generation-synchronous replacement (so a population can be
/// scored in parallel). `warm_start` members replace the first initial
/// vectors.
pub fn de_minimize<F, E>(
    objective: F,
    bounds: &[(f64, f64)],
    cfg: &DeConfig,
    seed: u64,
    warm_start: &[Vec<f64>],
    exec: &E,
) -> Result<DeResult, AlphaError>
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
    E: Executor,
{
    cfg.validate()?;
    if bounds.is_empty() || bounds.iter().any(|&(lo, hi)| !(lo < hi) || !lo.is_finite() || !hi.is_finite()) {
        return Err(AlphaError::InvalidConfig("bounds must be finite with min < max"));
    }
    let dim = bounds.len();
    let np = cfg.population;
    let mut rng = rng_from_seed(sub_seed(seed, streams::DIFFERENTIAL_EVOLUTION));
    let mut pop: Vec<Vec<f64>> = (0..np).map(|_| bounds.iter().map(|&(lo, hi)| rng.gen_range(lo..hi)).collect()).collect();
    for (slot, w) in pop.iter_mut().zip(warm_start) {
        if w.len() == dim && w.iter().zip(bounds).all(|(v, &(lo, hi))| (lo..=hi).contains(v)) {
            slot.clone_from(w);
        }
    }
    let eval = |xs: &[Vec<f64>]| exec.map(xs, |_, x| {
        let v = objective(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    });
    let mut fit = eval(&pop);
    let mut evaluations = np;
    let argmin = |f: &[f64]| (0..f.len()).fold(0, |b, i| if f[i] < f[b] { i } else { b });
    let mut best = argmin(&fit);
    let mut history = alloc::vec![fit[best]];
    for _ in 0..cfg.generations {
        let trials: Vec<Vec<f64>> = (0..np)
            .map(|i| {
                let pick = |rng: &mut rand_chacha::ChaCha8Rng, avoid: &[usize]| loop {
                    let r = rng.gen_range(0..np);
                    if !avoid.contains(&r) {
                        break r;
                    }
                };
                let r1 = pick(&mut rng, &[i, best]);
                let r2 = pick(&mut rng, &[i, best, r1]);
                let forced = rng.gen_range(0..dim);
                (0..dim)
                    .map(|j| {
                        let (lo, hi) = bounds[j];
                        if j == forced || rng.gen::<f64>() < cfg.recombination {
                            let v = pop[best][j] + cfg.mutation * (pop[r1][j] - pop[r2][j]);
                            if (lo..=hi).contains(&v) {
                                v
                            } else {
                                rng.gen_range(lo..hi)
                            }
                        } else {
                            pop[i][j]
                        }
                    })
                    .collect()
            })
            .collect();
        let tf = eval(&trials);
        evaluations += np;
        for (i, (t, f)) in trials.into_iter().zip(tf).enumerate() {
            if f <= fit[i] {
                pop[i] = t;
                fit[i] = f;
            }
        }
        best = argmin(&fit);
        history.push(fit[best]);
    }
    if fit[best] == f64::INFINITY {
        return Err(AlphaError::NoFeasibleAlpha);
    }
    Ok(DeResult { x: pop[best].clone(), score: fit[best], history, evaluations })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub enum HeuristicMode {
    Min,
    #[default]
    Max,
    Mean,
    Median,
}

/// Distance from each point to its nearest distinct neighbour (brute force).
pub fn nearest_neighbor_distances(points: &[f64], d: usize) -> Result<Vec<f64>, AlphaError> {
    let n = points.len() / d;
    if n < 2 {
        return Err(AlphaError::Geometry(GeometryError::TooFewPoints { got: n, need: 2, dim: d }));
    }
    let mut best = alloc::vec![f64::INFINITY; n];
    for i in 0..n {
        let p = &points[i * d..(i + 1) * d];
        for j in i + 1..n {
            let q = &points[j * d..(j + 1) * d];
            let s: f64 = p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
            if s > 0.0 {
                best[i] = best[i].min(s);
                best[j] = best[j].min(s);
            }
        }
    }
    let out: Vec<f64> = best.into_iter().filter(|v| v.is_finite()).map(libm::sqrt).collect();
    if out.is_empty() {
        return Err(AlphaError::ZeroDistance);
    }
    Ok(out)
}

fn median(sorted: &[f64]) -> f64 {
    let m = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[m]
    } else {
        0.5 * (sorted[m - 1] + sorted[m])
    }
}

pub fn alpha_heuristic(points: &[f64], d: usize, mode: HeuristicMode) -> Result<f64, AlphaError> {
    let mut nn = nearest_neighbor_distances(points, d)?;
    nn.sort_by(f64::total_cmp);
    Ok(match mode {
        HeuristicMode::Min => nn[0],
        HeuristicMode::Max => nn[nn.len() - 1],
        HeuristicMode::Mean => nn.iter().sum::<f64>() / nn.len() as f64,
        HeuristicMode::Median => median(&nn),
    })
}

/// `(0.5, 4) ×` the median nearest-neighbour distance. [`select_alpha`]
/// raises the upper end to 1.1 × the cross-validation rejection bound when
/// that is larger.
pub fn default_bounds(points: &[f64], d: usize) -> Result<(f64, f64), AlphaError> {
    let m = alpha_heuristic(points, d, HeuristicMode::Median)?;
    Ok((0.5 * m, 4.0 * m))
}

/// How α is chosen for a point set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub enum AlphaPolicy {
    /// α = ∞: the full Delaunay triangulation.
    ConvexHull,
    Fixed { alpha: f64 },
    /// `scale ×` a nearest-neighbour statistic of the set being triangulated.
    Heuristic {
        mode: HeuristicMode,
        #[serde(default = "unit")]
        scale: f64,
    },
    /// Cross-validation with differential evolution, once per snapshot.
    CrossValidated {
        #[serde(default)]
        cv: CrossValConfig,
        #[serde(default)]
        de: DeConfig,
        #[serde(default)]
        warm_start: bool,
    },
}

fn unit() -> f64 {
    1.0
}

impl Default for AlphaPolicy {
    fn default() -> Self {
        AlphaPolicy::Heuristic { mode: HeuristicMode::Max, scale: 4.0 }
    }
}

impl AlphaPolicy {
    pub fn validate(&self) -> Result<(), AlphaError> {
        match *self {
            AlphaPolicy::ConvexHull => Ok(()),
            AlphaPolicy::Fixed { alpha } if alpha > 0.0 => Ok(()),
            AlphaPolicy::Fixed { .. } => Err(AlphaError::InvalidConfig("fixed α must be positive")),
            AlphaPolicy::Heuristic { scale, .. } if scale > 0.0 && scale.is_finite() => Ok(()),
            AlphaPolicy::Heuristic { .. } => Err(AlphaError::InvalidConfig("heuristic scale must be positive")),
            AlphaPolicy::CrossValidated { de, .. } => de.validate(),
        }
    }

    /// Per-set α for the policies that do not need a search.
    pub fn local_alpha(&self, points: &[f64], d: usize) -> Result<Option<f64>, AlphaError> {
        match *self {
            AlphaPolicy::ConvexHull => Ok(Some(f64::INFINITY)),
            AlphaPolicy::Fixed { alpha } => Ok(Some(alpha)),
            AlphaPolicy::Heuristic { mode, scale } => Ok(Some(scale * alpha_heuristic(points, d, mode)?)),
            AlphaPolicy::CrossValidated { .. } => Ok(None),
        }
    }
}

/// Outcome of a cross-validated search, for the run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSelection {
    pub alpha: f64,
    pub score: f64,
    pub bounds: (f64, f64),
    pub evaluations: usize,
    pub skipped_folds: usize,
}

/// Cross-validated α for flat `points`; `previous` seeds the population
/// when warm-starting.
pub fn select_alpha<E: Executor>(
    points: &[f64],
    d: usize,
    cv: &CrossValConfig,
    de: &DeConfig,
    previous: Option<f64>,
    seed: u64,
    exec: &E,
) -> Result<AlphaSelection, AlphaError> {
    let validator = CrossValidator::new(points, d, cv, exec)?;
    let bounds = match de.bounds {
        Some(b) => b,
        None => {
            // Widen past the rejection bound so some α is always feasible.
            let (lo, hi) = default_bounds(points, d)?;
            let b = validator.rejection_bound();
            (lo, if b.is_finite() { hi.max(1.1 * b) } else { hi })
        }
    };
    let warm: Vec<Vec<f64>> = previous.into_iter().map(|a| alloc::vec![a]).collect();
    let res = de_minimize(|x| validator.score(x[0]), &[bounds], de, seed, &warm, exec)?;
    Ok(AlphaSelection { alpha: res.x[0], score: res.score, bounds, evaluations: res.evaluations, skipped_folds: validator.skipped })
}
