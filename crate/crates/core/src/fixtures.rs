//! Synthetic point sets shared by tests, the acceptance suite and the CLI.

use alloc::vec::Vec;

/// Concave point set with a hole: three concentric rings of nodes and ten
/// held-out query points between them.
#[derive(Debug, Clone, PartialEq)]
pub struct RingFixture {
    pub center: [f64; 2],
    pub inner: f64,
    pub outer: f64,
    /// Flat `(x, y)` node coordinates.
    pub nodes: Vec<f64>,
    /// Flat `(x, y)` held-out coordinates.
    pub held_out: Vec<f64>,
    /// An α that removes the hole and keeps the ring.
    pub tuned_alpha: f64,
}

impl RingFixture {
    pub fn in_hole(&self, p: &[f64]) -> bool {
        libm::hypot(p[0] - self.center[0], p[1] - self.center[1]) < self.inner
    }
}

/// Rings of 10, 14 and 18 nodes at radii 0.3, 0.45 and 0.6 about (0, 0.8),
/// successive rings rotated by half and quarter spacing.
pub fn ring() -> RingFixture {
    let center = [0.0, 0.8];
    let (inner, outer) = (0.3, 0.6);
    let tau = 2.0 * core::f64::consts::PI;
    let mut nodes = Vec::new();
    for (count, radius, offset) in [(10, inner, 0.0), (14, 0.5 * (inner + outer), 0.5), (18, outer, 0.25)] {
        for k in 0..count {
            let t = tau * (k as f64 + offset) / count as f64;
            nodes.extend_from_slice(&[center[0] + radius * libm::cos(t), center[1] + radius * libm::sin(t)]);
        }
    }
    let mut held_out = Vec::new();
    for k in 0..10 {
        let t = tau * (k as f64 + 0.37) / 10.0;
        let r = inner + (outer - inner) * if k % 2 == 0 { 0.3 } else { 0.7 };
        held_out.extend_from_slice(&[center[0] + r * libm::cos(t), center[1] + r * libm::sin(t)]);
    }
    RingFixture { center, inner, outer, nodes, held_out, tuned_alpha: 0.2 }
}
