//! Incremental Delaunay triangulation (Bowyer–Watson) in `d` dimensions.
//!
//! The convex hull is closed with a vertex at infinity so that points outside
//! the current hull need no special casing. Each finite cell is stored with
//! positive orientation; an infinite cell is oriented so that substituting a
//! point beyond its hull facet for the infinite vertex gives a positive
//! orientation. Replacing the vertex opposite a cavity facet by the new point
//! preserves both conventions.
//!
//! Cospherical ties are broken by symbolic perturbation of the lifting map in
//! input-index order (see [`super::predicates::insphere`]), so the result is
//! a deterministic function of the input order.

use alloc::vec::Vec;
use core::cmp::Ordering;

use super::predicates::{insphere, orient, MAX_ORDER};
use super::simplex::{barycentric, circumradius, simplex_volume};
use super::GeometryError;

/// Missing neighbour (hull facet) marker.
pub const NONE: usize = usize::MAX;
const INF: usize = usize::MAX;

/// Relative simplex volume below which a simplex is discarded as flat.
pub const DEGENERACY: f64 = 1e-14;

/// Barycentric tolerance for point location.
pub const INSIDE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Triangulation {
    pub dim: usize,
    /// Flat coordinates, `dim` per point, as supplied.
    pub points: Vec<f64>,
    /// Flat vertex indices, `dim + 1` per simplex.
    pub simplices: Vec<usize>,
    /// Neighbour opposite each vertex, or [`NONE`].
    pub neighbors: Vec<usize>,
    pub volume: Vec<f64>,
    /// Cayley–Menger circumradius; `∞` if it could not be evaluated.
    pub circumradius: Vec<f64>,
    /// Indices of exact duplicate points that were not inserted.
    pub duplicates: Vec<usize>,
}

impl Triangulation {
    pub fn len(&self) -> usize {
        self.volume.len()
    }

    pub fn is_empty(&self) -> bool {
        self.volume.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn simplex(&self, k: usize) -> &[usize] {
        &self.simplices[k * (self.dim + 1)..(k + 1) * (self.dim + 1)]
    }

    pub fn simplex_points(&self, k: usize) -> Vec<&[f64]> {
        self.simplex(k).iter().map(|&i| self.point(i)).collect()
    }

    pub fn total_volume(&self) -> f64 {
        self.volume.iter().sum()
    }

    /// Simplex containing `x` (barycentric coordinates ≥ −[`INSIDE_TOL`])
    /// by a visibility walk from `hint`, with a full scan as fallback.
    pub fn locate(&self, x: &[f64], hint: Option<usize>) -> Option<(usize, Vec<f64>)> {
        if self.is_empty() {
            return None;
        }
        let d = self.dim;
        let mut s = hint.filter(|&h| h < self.len()).unwrap_or(0);
        for _ in 0..self.len().min(10_000) + 8 {
            let lam = barycentric(&self.simplex_points(s), x).ok()?;
            let (imin, &lmin) = lam.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
            if lmin >= -INSIDE_TOL {
                return Some((s, lam));
            }
            let nb = self.neighbors[s * (d + 1) + imin];
            if nb == NONE {
                return None;
            }
            s = nb;
        }
        (0..self.len()).find_map(|k| {
            let lam = barycentric(&self.simplex_points(k), x).ok()?;
            lam.iter().all(|&l| l >= -INSIDE_TOL).then_some((k, lam))
        })
    }
}

struct Builder<'a> {
    d: usize,
    pts: &'a [f64],
    verts: Vec<usize>,
    nbr: Vec<usize>,
    alive: Vec<bool>,
    free: Vec<usize>,
    mark: Vec<u32>,
    stamp: u32,
    last: usize,
    walk_rng: u64,
}

impl<'a> Builder<'a> {
    fn point(&self, i: usize) -> &'a [f64] {
        &self.pts[i * self.d..(i + 1) * self.d]
    }

    fn cell(&self, c: usize) -> &[usize] {
        &self.verts[c * (self.d + 1)..(c + 1) * (self.d + 1)]
    }

    fn inf_pos(&self, c: usize) -> Option<usize> {
        self.cell(c).iter().position(|&v| v == INF)
    }

    fn alloc(&mut self, verts: &[usize]) -> usize {
        let n = self.d + 1;
        if let Some(c) = self.free.pop() {
            self.verts[c * n..(c + 1) * n].copy_from_slice(verts);
            self.nbr[c * n..(c + 1) * n].iter_mut().for_each(|x| *x = NONE);
            self.alive[c] = true;
            self.mark[c] = 0;
            c
        } else {
            self.verts.extend_from_slice(verts);
            self.nbr.extend(core::iter::repeat(NONE).take(n));
            self.alive.push(true);
            self.mark.push(0);
            self.alive.len() - 1
        }
    }

    /// Orientation of cell `c` with `q` substituted at position `j`.
    fn orient_subst(&self, c: usize, j: usize, q: &[f64]) -> Ordering {
        let mut refs: [&[f64]; MAX_ORDER] = [&[]; MAX_ORDER];
        for (k, &v) in self.cell(c).iter().enumerate() {
            refs[k] = if k == j { q } else { self.point(v) };
        }
        orient(&refs[..self.d + 1], self.d)
    }

    fn conflict_finite(&self, c: usize, q: &[f64], qid: usize) -> bool {
        let mut refs: [&[f64]; MAX_ORDER] = [&[]; MAX_ORDER];
        for (k, &v) in self.cell(c).iter().enumerate() {
            refs[k] = self.point(v);
        }
        insphere(&refs[..self.d + 1], self.cell(c), q, qid, self.d) == Ordering::Greater
    }

    fn conflict(&self, c: usize, q: &[f64], qid: usize) -> bool {
        match self.inf_pos(c) {
            None => self.conflict_finite(c, q, qid),
            Some(j) => match self.orient_subst(c, j, q) {
                Ordering::Greater => true,
                Ordering::Less => false,
                // On the hull hyperplane: in conflict iff inside the facet's
                // circumsphere, which the finite neighbour's sphere decides.
                Ordering::Equal => self.conflict_finite(self.nbr[c * (self.d + 1) + j], q, qid),
            },
        }
    }

    fn locate(&mut self, q: &[f64], qid: usize) -> Option<usize> {
        let n = self.d + 1;
        let mut c = self.last;
        if !self.alive[c] {
            c = self.alive.iter().position(|&a| a)?;
        }
        let budget = 4 * self.alive.len() + 64;
        'walk: for _ in 0..budget {
            if self.inf_pos(c).is_some() {
                if self.conflict(c, q, qid) {
                    return Some(c);
                }
                break;
            }
            self.walk_rng = self.walk_rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let off = (self.walk_rng >> 33) as usize % n;
            for t in 0..n {
                let j = (off + t) % n;
                if self.orient_subst(c, j, q) == Ordering::Less {
                    c = self.nbr[c * n + j];
                    continue 'walk;
                }
            }
            if self.conflict(c, q, qid) {
                return Some(c);
            }
            break;
        }
        (0..self.alive.len()).find(|&k| self.alive[k] && self.conflict(k, q, qid))
    }

    fn insert(&mut self, qid: usize) -> bool {
        let n = self.d + 1;
        let q = self.point(qid);
        let Some(c0) = self.locate(q, qid) else {
            return false;
        };
        self.stamp += 2;
        let (inside, outside) = (self.stamp, self.stamp + 1);
        self.mark[c0] = inside;
        let mut stack = alloc::vec![c0];
        let mut cavity = alloc::vec![c0];
        let mut boundary: Vec<(usize, usize)> = Vec::new();
        while let Some(c) = stack.pop() {
            for j in 0..n {
                let nb = self.nbr[c * n + j];
                if self.mark[nb] == inside {
                    continue;
                }
                if self.mark[nb] != outside && self.conflict(nb, q, qid) {
                    self.mark[nb] = inside;
                    stack.push(nb);
                    cavity.push(nb);
                } else {
                    self.mark[nb] = outside;
                    boundary.push((c, j));
                }
            }
        }

        let mut created = Vec::with_capacity(boundary.len());
        let mut buf = [0usize; MAX_ORDER];
        for &(c, j) in &boundary {
            buf[..n].copy_from_slice(self.cell(c));
            buf[j] = qid;
            let outer = self.nbr[c * n + j];
            let nc = self.alloc(&buf[..n]);
            self.nbr[nc * n + j] = outer;
            if let Some(k) = (0..n).find(|&k| self.nbr[outer * n + k] == c) {
                self.nbr[outer * n + k] = nc;
            }
            created.push((nc, j));
        }

        // Pair the facets through q by sorting their vertex keys.
        let kd = n - 1;
        let mut keys: Vec<usize> = Vec::with_capacity(created.len() * kd * kd);
        let mut owners: Vec<(usize, usize)> = Vec::with_capacity(created.len() * kd);
        for &(nc, jq) in &created {
            for i in 0..n {
                if i == jq {
                    continue;
                }
                let start = keys.len();
                keys.extend(self.cell(nc).iter().enumerate().filter(|&(k, _)| k != i).map(|(_, &v)| v));
                keys[start..].sort_unstable();
                owners.push((nc, i));
            }
        }
        let mut order: Vec<usize> = (0..owners.len()).collect();
        order.sort_unstable_by(|&a, &b| keys[a * kd..(a + 1) * kd].cmp(&keys[b * kd..(b + 1) * kd]));
        for w in order.chunks(2) {
            if let [a, b] = *w {
                debug_assert_eq!(keys[a * kd..(a + 1) * kd], keys[b * kd..(b + 1) * kd]);
                let ((ca, ia), (cb, ib)) = (owners[a], owners[b]);
                self.nbr[ca * n + ia] = cb;
                self.nbr[cb * n + ib] = ca;
            }
        }

        for c in cavity {
            self.alive[c] = false;
            self.free.push(c);
        }
        self.last = created[0].0;
        true
    }
}

/// Pick `d + 1` affinely independent points greedily (Gram–Schmidt with a
/// relative tolerance), confirmed by an exact orientation test.
fn initial_simplex(pts: &[f64], d: usize, order: &[usize]) -> Option<Vec<usize>> {
    let p = |i: usize| &pts[i * d..(i + 1) * d];
    let mut chosen = alloc::vec![order[0]];
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let scale = order.iter().map(|&i| p(i).iter().zip(p(order[0])).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()).fold(0.0, f64::max);
    let scale = libm::sqrt(scale);
    if scale == 0.0 {
        return None;
    }
    for &i in &order[1..] {
        if chosen.len() == d + 1 {
            break;
        }
        let mut v: Vec<f64> = p(i).iter().zip(p(order[0])).map(|(a, b)| a - b).collect();
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
        }
        let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
        if norm > 1e-9 * scale {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
            chosen.push(i);
        }
    }
    if chosen.len() < d + 1 {
        return None;
    }
    let refs: Vec<&[f64]> = chosen.iter().map(|&i| p(i)).collect();
    (orient(&refs, d) != Ordering::Equal).then_some(chosen)
}

/// Z-order of the points (quantized to their bounding box).
fn morton_order(pts: &[f64], d: usize, idx: &[usize]) -> Vec<usize> {
    let mut lo = alloc::vec![f64::INFINITY; d];
    let mut hi = alloc::vec![f64::NEG_INFINITY; d];
    for &i in idx {
        for j in 0..d {
            lo[j] = lo[j].min(pts[i * d + j]);
            hi[j] = hi[j].max(pts[i * d + j]);
        }
    }
    let bits = (63 / d).min(21) as u32;
    let max = ((1u64 << bits) - 1) as f64;
    let mut keyed: Vec<(u64, usize)> = idx
        .iter()
        .map(|&i| {
            let q: Vec<u64> = (0..d)
                .map(|j| {
                    let w = hi[j] - lo[j];
                    if w > 0.0 {
                        ((pts[i * d + j] - lo[j]) / w * max) as u64
                    } else {
                        0
                    }
                })
                .collect();
            let mut key = 0u64;
            for b in (0..bits).rev() {
                for qj in &q {
                    key = (key << 1) | ((qj >> b) & 1);
                }
            }
            (key, i)
        })
        .collect();
    keyed.sort_unstable();
    keyed.into_iter().map(|(_, i)| i).collect()
}

/// Delaunay triangulation of flat `points` (stride `dim`).
///
/// Exact duplicates are inserted once (the lowest index is kept); simplices
/// flatter than [`DEGENERACY`] × (bounding-box diagonal)^d are dropped.
pub fn delaunay(points: &[f64], dim: usize) -> Result<Triangulation, GeometryError> {
    let d = dim;
    if d == 0 || d + 2 > MAX_ORDER {
        return Err(GeometryError::UnsupportedDimension(d));
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(GeometryError::NonFinite);
    }
    let count = points.len() / d;
    if count < d + 1 {
        return Err(GeometryError::TooFewPoints { got: count, need: d + 1, dim: d });
    }
    let p = |i: usize| &points[i * d..(i + 1) * d];

    let mut lex: Vec<usize> = (0..count).collect();
    lex.sort_by(|&a, &b| p(a).partial_cmp(p(b)).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
    let mut unique = Vec::with_capacity(count);
    let mut duplicates = Vec::new();
    for (k, &i) in lex.iter().enumerate() {
        if k > 0 && p(lex[k - 1]) == p(i) {
            duplicates.push(i);
        } else {
            unique.push(i);
        }
    }
    duplicates.sort_unstable();
    unique.sort_unstable();

    let order = morton_order(points, d, &unique);
    let init = initial_simplex(points, d, &order).ok_or(GeometryError::Degenerate)?;

    let n = d + 1;
    let mut b = Builder {
        d,
        pts: points,
        verts: Vec::new(),
        nbr: Vec::new(),
        alive: Vec::new(),
        free: Vec::new(),
        mark: Vec::new(),
        stamp: 0,
        last: 0,
        walk_rng: 0x2545_F491_4F6C_DD1D,
    };
    let mut first = init.clone();
    let refs: Vec<&[f64]> = first.iter().map(|&i| p(i)).collect();
    if orient(&refs, d) == Ordering::Less {
        first.swap(0, 1);
    }
    let c0 = b.alloc(&first);
    for j in 0..n {
        let mut v = first.clone();
        v[j] = INF;
        v.swap(j, (j + 1) % n);
        let cj = b.alloc(&v);
        b.nbr[c0 * n + j] = cj;
    }
    // Infinite cells: opposite ∞ is the finite cell; the others pair up.
    let cells: Vec<usize> = (1..=n).collect();
    for &c in &cells {
        for k in 0..n {
            let v = b.cell(c)[k];
            if v == INF {
                b.nbr[c * n + k] = c0;
                continue;
            }
            let facet: Vec<usize> = {
                let mut f: Vec<usize> = b.cell(c).iter().enumerate().filter(|&(m, _)| m != k).map(|(_, &x)| x).collect();
                f.sort_unstable();
                f
            };
            for &o in &cells {
                if o == c {
                    continue;
                }
                if let Some(m) = (0..n).find(|&m| {
                    let mut f: Vec<usize> = b.cell(o).iter().enumerate().filter(|&(t, _)| t != m).map(|(_, &x)| x).collect();
                    f.sort_unstable();
                    f == facet
                }) {
                    b.nbr[c * n + k] = o;
                    b.nbr[o * n + m] = c;
                }
            }
        }
    }

    for &i in &order {
        if init.contains(&i) {
            continue;
        }
        if !b.insert(i) {
            log::warn!("point {i} could not be located; skipped");
        }
    }

    // Extract finite cells.
    let mut lo = alloc::vec![f64::INFINITY; d];
    let mut hi = alloc::vec![f64::NEG_INFINITY; d];
    for i in 0..count {
        for j in 0..d {
            lo[j] = lo[j].min(points[i * d + j]);
            hi[j] = hi[j].max(points[i * d + j]);
        }
    }
    let diag = libm::sqrt((0..d).map(|j| (hi[j] - lo[j]) * (hi[j] - lo[j])).sum::<f64>());
    let threshold = DEGENERACY * libm::pow(diag, d as f64);
    let mut remap = alloc::vec![NONE; b.alive.len()];
    let mut simplices = Vec::new();
    let mut volume = Vec::new();
    let mut radius = Vec::new();
    let mut dropped = 0;
    for c in 0..b.alive.len() {
        if !b.alive[c] || b.inf_pos(c).is_some() {
            continue;
        }
        let refs: Vec<&[f64]> = b.cell(c).iter().map(|&v| p(v)).collect();
        let vol = simplex_volume(&refs);
        if !(vol > threshold) {
            dropped += 1;
            continue;
        }
        remap[c] = volume.len();
        simplices.extend_from_slice(b.cell(c));
        volume.push(vol);
        radius.push(circumradius(&refs).unwrap_or(f64::INFINITY));
    }
    if dropped > 0 {
        log::debug!("dropped {dropped} flat simplices");
    }
    let mut neighbors = Vec::with_capacity(simplices.len());
    for c in 0..b.alive.len() {
        if remap[c] == NONE {
            continue;
        }
        neighbors.extend(b.nbr[c * n..(c + 1) * n].iter().map(|&o| if o == NONE { NONE } else { remap[o] }));
    }
    Ok(Triangulation { dim: d, points: points.to_vec(), simplices, neighbors, volume, circumradius: radius, duplicates })
}
