//! Simplicial interpolation over an alpha complex.
//!
//! The linear scheme is `L(x) = Σ λ_i(x) f_i`. The gradient-enhanced scheme
//! replaces each nodal value with its reduced dual Taylor expansion about the
//! node, `D^{mn}[f](x) = Σ_{|κ| ≤ n} C^{mn}_{|κ|} (x − p)^κ f^{(κ)}(p) / κ!`,
//! which with `m = n = 1` reproduces quadratics exactly.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{AlphaComplex, Triangulation};
use crate::linalg::binomial;

pub use crate::geometry::barycentric;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum InterpolationError {
    #[error("query point lies outside the complex")]
    Outside,
    #[error("derivatives of order {0} are not available")]
    OrderUnavailable(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub enum InterpolationMode {
    Linear,
    #[default]
    GradientEnhanced,
}

/// A node with value and gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorNode<'a> {
    pub position: &'a [f64],
    pub f: f64,
    pub grad: &'a [f64],
}

/// `C^{mn}_k = C(m+n, m)⁻¹ · C(m+n−k, m)`.
pub fn reduction_coefficient(m: usize, n: usize, k: usize) -> f64 {
    binomial(m + n - k, m) / binomial(m + n, m)
}

/// Reduced dual Taylor expansion of the node evaluated at `x`; only `n ≤ 1`
/// is available since nodes carry first derivatives.
pub fn reduced_dual_taylor(node: &TaylorNode<'_>, x: &[f64], m: usize, n: usize) -> Result<f64, InterpolationError> {
    if n > 1 {
        return Err(InterpolationError::OrderUnavailable(n));
    }
    let mut v = reduction_coefficient(m, n, 0) * node.f;
    if n == 1 {
        let dot: f64 = x.iter().zip(node.position).zip(node.grad).map(|((a, p), g)| (a - p) * g).sum();
        v += reduction_coefficient(m, n, 1) * dot;
    }
    Ok(v)
}

/// Nodal data over a triangulation's vertices: values and optional flat
/// gradients (stride `dim`).
#[derive(Debug, Clone, Copy)]
pub struct NodalField<'a> {
    pub values: &'a [f64],
    pub grads: Option<&'a [f64]>,
}

impl NodalField<'_> {
    /// Interpolant inside simplex `k` at barycentric coordinates `lam`
    /// (position `x`).
    pub fn eval_in(&self, tri: &Triangulation, k: usize, lam: &[f64], x: &[f64], mode: InterpolationMode) -> f64 {
        let d = tri.dim;
        let verts = tri.simplex(k);
        match (mode, self.grads) {
            (InterpolationMode::GradientEnhanced, Some(g)) => {
                let c1 = reduction_coefficient(1, 1, 1);
                verts
                    .iter()
                    .zip(lam)
                    .map(|(&v, l)| {
                        let p = tri.point(v);
                        let gv = &g[v * d..(v + 1) * d];
                        let dot: f64 = (0..d).map(|j| (x[j] - p[j]) * gv[j]).sum();
                        l * (self.values[v] + c1 * dot)
                    })
                    .sum()
            }
            _ => verts.iter().zip(lam).map(|(&v, l)| l * self.values[v]).sum(),
        }
    }

    /// Interpolant at the barycenter of simplex `k`.
    pub fn at_barycenter(&self, tri: &Triangulation, k: usize, mode: InterpolationMode) -> f64 {
        let d = tri.dim;
        let w = 1.0 / (d + 1) as f64;
        let mut x = alloc::vec![0.0; d];
        for &v in tri.simplex(k) {
            for (xj, pj) in x.iter_mut().zip(tri.point(v)) {
                *xj += w * pj;
            }
        }
        let lam = alloc::vec![w; d + 1];
        self.eval_in(tri, k, &lam, &x, mode)
    }
}

/// `Σ λ_i f_i` in the kept simplex containing `x`. `hint` caches the last
/// simplex found.
pub fn interp_linear(
    complex: &AlphaComplex<'_>,
    values: &[f64],
    x: &[f64],
    hint: &mut Option<usize>,
) -> Result<f64, InterpolationError> {
    let (k, lam) = complex.locate(x, *hint).ok_or(InterpolationError::Outside)?;
    *hint = Some(k);
    Ok(NodalField { values, grads: None }.eval_in(complex.tri, k, &lam, x, InterpolationMode::Linear))
}

/// `Σ λ_i D^{11}[f](x; p_i)` in the kept simplex containing `x`.
pub fn interp_gradient_enhanced(
    complex: &AlphaComplex<'_>,
    values: &[f64],
    grads: &[f64],
    x: &[f64],
    hint: &mut Option<usize>,
) -> Result<f64, InterpolationError> {
    let (k, lam) = complex.locate(x, *hint).ok_or(InterpolationError::Outside)?;
    *hint = Some(k);
    Ok(NodalField { values, grads: Some(grads) }.eval_in(complex.tri, k, &lam, x, InterpolationMode::GradientEnhanced))
}

/// Relative errors `|f̃ − f| / |f|` of interpolating `f = y²` at the held-out
/// points of the ring fixture with the complex at `alpha`.
pub fn ring_fixture_errors(alpha: f64) -> Result<RingErrors, InterpolationError> {
    let fx = crate::fixtures::ring();
    let tri = crate::geometry::delaunay(&fx.nodes, 2).map_err(|_| InterpolationError::Outside)?;
    let complex = AlphaComplex::new(&tri, alpha);
    let f = |p: &[f64]| p[1] * p[1];
    let values: Vec<f64> = fx.nodes.chunks(2).map(f).collect();
    let grads: Vec<f64> = fx.nodes.chunks(2).flat_map(|p| [0.0, 2.0 * p[1]]).collect();
    let (mut lin, mut enh) = (Vec::new(), Vec::new());
    let mut hint = None;
    for q in fx.held_out.chunks(2) {
        let exact = f(q);
        let l = interp_linear(&complex, &values, q, &mut hint)?;
        let g = interp_gradient_enhanced(&complex, &values, &grads, q, &mut hint)?;
        lin.push(libm::fabs(l - exact) / exact);
        enh.push(libm::fabs(g - exact) / exact);
    }
    let k = lin.len() as f64;
    let rms = |e: &[f64]| libm::sqrt(e.iter().map(|v| v * v).sum::<f64>() / k);
    Ok(RingErrors {
        linear_mean: lin.iter().sum::<f64>() / k,
        linear_max: lin.iter().cloned().fold(0.0, f64::max),
        linear_rms: rms(&lin),
        enhanced_rms: rms(&enh),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingErrors {
    pub linear_mean: f64,
    pub linear_max: f64,
    pub linear_rms: f64,
    pub enhanced_rms: f64,
}
