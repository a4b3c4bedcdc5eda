//! Alpha complexes: the Delaunay simplices with circumradius below α.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::delaunay::Triangulation;

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaComplex<'a> {
    pub tri: &'a Triangulation,
    pub alpha: f64,
    pub kept: Vec<bool>,
}

impl<'a> AlphaComplex<'a> {
    /// Keep `{T : σ_T < α}`; `α = ∞` keeps every simplex.
    pub fn new(tri: &'a Triangulation, alpha: f64) -> Self {
        let kept = tri.circumradius.iter().map(|&r| alpha == f64::INFINITY || r < alpha).collect();
        AlphaComplex { tri, alpha, kept }
    }

    pub fn kept_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.kept.iter().enumerate().filter(|(_, &k)| k).map(|(i, _)| i)
    }

    pub fn kept_count(&self) -> usize {
        self.kept.iter().filter(|&&k| k).count()
    }

    pub fn volume(&self) -> f64 {
        self.kept_indices().map(|k| self.tri.volume[k]).sum()
    }

    /// Kept simplex containing `x`, with its barycentric coordinates.
    pub fn locate(&self, x: &[f64], hint: Option<usize>) -> Option<(usize, Vec<f64>)> {
        let (k, lam) = self.tri.locate(x, hint)?;
        if self.kept[k] {
            return Some((k, lam));
        }
        // On a shared face the walk may stop in a pruned simplex while a
        // kept neighbour also contains x.
        let d = self.tri.dim;
        for (j, &l) in lam.iter().enumerate() {
            if l <= super::delaunay::INSIDE_TOL {
                let nb = self.tri.neighbors[k * (d + 1) + j];
                if nb != super::NONE && self.kept[nb] {
                    if let Ok(lam2) = super::barycentric(&self.tri.simplex_points(nb), x) {
                        if lam2.iter().all(|&v| v >= -super::delaunay::INSIDE_TOL) {
                            return Some((nb, lam2));
                        }
                    }
                }
            }
        }
        None
    }

    pub fn dump(&self) -> ComplexDump {
        let d = self.tri.dim;
        let idx: Vec<usize> = self.kept_indices().collect();
        ComplexDump {
            dim: d,
            alpha: if self.alpha.is_finite() { Some(self.alpha) } else { None },
            vertices: self.tri.points.chunks(d).map(|c| c.to_vec()).collect(),
            simplices: idx.iter().map(|&k| self.tri.simplex(k).to_vec()).collect(),
            circumradius: idx.iter().map(|&k| self.tri.circumradius[k]).collect(),
            volume: idx.iter().map(|&k| self.tri.volume[k]).collect(),
        }
    }
}

/// Serializable view of a complex for external visualization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexDump {
    pub dim: usize,
    /// `None` for the full triangulation.
    pub alpha: Option<f64>,
    pub vertices: Vec<Vec<f64>>,
    pub simplices: Vec<Vec<usize>>,
    pub circumradius: Vec<f64>,
    pub volume: Vec<f64>,
}
