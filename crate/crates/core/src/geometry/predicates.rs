//! Orientation and in-sphere signs with an exact fallback.
//!
//! Determinants are first evaluated in floating point with partial pivoting;
//! if the result is not clearly separated from zero (relative to the product
//! of row norms) they are recomputed exactly on big integers with Bareiss
//! elimination. Every finite `f64` is an integer multiple of a power of two,
//! so shifting all entries to a common exponent makes the computation exact.

use alloc::vec::Vec;
use core::cmp::Ordering;

use num_bigint::BigInt;
use num_traits::float::FloatCore;
use num_traits::{Signed, Zero};

/// Relative separation under which the floating-point sign is not trusted.
const FILTER: f64 = 1e-10;

/// Largest determinant order handled by the stack path.
pub const MAX_ORDER: usize = 10;

fn float_det_sign(m: &mut [f64], n: usize) -> Option<Ordering> {
    let mut bound = 1.0;
    for i in 0..n {
        let s: f64 = m[i * n..(i + 1) * n].iter().map(|v| v * v).sum();
        bound *= libm::sqrt(s);
    }
    if bound == 0.0 {
        return Some(Ordering::Equal);
    }
    if !bound.is_finite() {
        return None;
    }
    let mut det = 1.0;
    for k in 0..n {
        let mut p = k;
        for i in k + 1..n {
            if libm::fabs(m[i * n + k]) > libm::fabs(m[p * n + k]) {
                p = i;
            }
        }
        let piv = m[p * n + k];
        if piv == 0.0 {
            return None;
        }
        if p != k {
            for j in 0..n {
                m.swap(k * n + j, p * n + j);
            }
            det = -det;
        }
        det *= piv;
        for i in k + 1..n {
            let f = m[i * n + k] / piv;
            if f != 0.0 {
                for j in k + 1..n {
                    m[i * n + j] -= f * m[k * n + j];
                }
            }
        }
    }
    if libm::fabs(det) > FILTER * bound {
        Some(det.partial_cmp(&0.0).unwrap_or(Ordering::Equal))
    } else {
        None
    }
}

fn to_exact(values: &[f64]) -> Vec<BigInt> {
    let decoded: Vec<(u64, i16, i8)> = values.iter().map(|v| v.integer_decode()).collect();
    let emin = decoded.iter().filter(|d| d.0 != 0).map(|d| d.1).min().unwrap_or(0);
    decoded
        .iter()
        .map(|&(m, e, s)| {
            let v = BigInt::from(m) << ((e - emin) as usize);
            if s < 0 {
                -v
            } else {
                v
            }
        })
        .collect()
}

/// Sign of the determinant of an exact integer matrix (Bareiss).
fn bareiss_sign(mut m: Vec<BigInt>, n: usize) -> Ordering {
    let mut sign = 1;
    let mut prev = BigInt::from(1);
    for k in 0..n {
        if m[k * n + k].is_zero() {
            match (k + 1..n).find(|&i| !m[i * n + k].is_zero()) {
                Some(p) => {
                    for j in 0..n {
                        m.swap(k * n + j, p * n + j);
                    }
                    sign = -sign;
                }
                None => return Ordering::Equal,
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = (&m[i * n + j] * &m[k * n + k] - &m[i * n + k] * &m[k * n + j]) / &prev;
                m[i * n + j] = v;
            }
        }
        prev = m[k * n + k].clone();
    }
    let last = &m[n * n - 1];
    let s = if last.is_positive() {
        1
    } else if last.is_negative() {
        -1
    } else {
        0
    };
    (s * sign).cmp(&0)
}

/// `sign det[y_i, 1]` over the `d + 1` points `y_0..y_d` (row order matters).
pub fn orient(points: &[&[f64]], d: usize) -> Ordering {
    debug_assert_eq!(points.len(), d + 1);
    if d == 0 {
        return Ordering::Greater;
    }
    // det[y_i, 1] = (−1)^d det[y_i − y_0]_{i ≥ 1}.
    let flip = d % 2 == 1;
    let mut m = [0.0; MAX_ORDER * MAX_ORDER];
    for i in 0..d {
        for j in 0..d {
            m[i * d + j] = points[i + 1][j] - points[0][j];
        }
    }
    let s = match float_det_sign(&mut m[..d * d], d) {
        Some(s) => s,
        None => {
            let flat: Vec<f64> = points.iter().flat_map(|p| p[..d].iter().copied()).collect();
            let ex = to_exact(&flat);
            let mut mm = Vec::with_capacity(d * d);
            for i in 0..d {
                for j in 0..d {
                    mm.push(&ex[(i + 1) * d + j] - &ex[j]);
                }
            }
            bareiss_sign(mm, d)
        }
    };
    if flip {
        s.reverse()
    } else {
        s
    }
}

/// Unperturbed lifted determinant `H = det[y, |y|², 1]` over the rows
/// `p_0..p_d, q`. For a simplex with `orient > 0`, `H > 0` means `q` lies
/// strictly inside its circumsphere.
pub fn insphere_raw(simplex: &[&[f64]], q: &[f64], d: usize) -> Ordering {
    debug_assert_eq!(simplex.len(), d + 1);
    // Translating by q: H = det[p_i − q, |p_i − q|²].
    let n = d + 1;
    let mut m = [0.0; MAX_ORDER * MAX_ORDER];
    for i in 0..n {
        let mut w = 0.0;
        for j in 0..d {
            let t = simplex[i][j] - q[j];
            m[i * n + j] = t;
            w += t * t;
        }
        m[i * n + d] = w;
    }
    if let Some(s) = float_det_sign(&mut m[..n * n], n) {
        return s;
    }
    let flat: Vec<f64> = simplex.iter().chain(core::iter::once(&q)).flat_map(|p| p[..d].iter().copied()).collect();
    let ex = to_exact(&flat);
    let qx = &ex[n * d..];
    let mut mm = Vec::with_capacity(n * n);
    for i in 0..n {
        let mut w = BigInt::zero();
        for j in 0..d {
            let t = &ex[i * d + j] - &qx[j];
            w += &t * &t;
            mm.push(t);
        }
        mm.push(w);
    }
    bareiss_sign(mm, n)
}

/// In-sphere sign under symbolic perturbation of the lifting: point with
/// global index `k` is lifted by an extra `ε^(2^k)`-like amount, smaller
/// indices dominating. Never returns `Equal` for affinely independent input.
pub fn insphere(simplex: &[&[f64]], ids: &[usize], q: &[f64], qid: usize, d: usize) -> Ordering {
    let s = insphere_raw(simplex, q, d);
    if s != Ordering::Equal {
        return s;
    }
    // H is linear in the lifted column; ∂H/∂w_k is the cofactor
    // (−1)^(k+d) det[y_m, 1]_{m ≠ k}. Evaluate in increasing index order.
    let n = d + 2;
    let mut rows: Vec<(usize, usize)> = (0..d + 1).map(|k| (ids[k], k)).collect();
    rows.push((qid, d + 1));
    rows.sort_unstable();
    let all: Vec<&[f64]> = simplex.iter().copied().chain(core::iter::once(q)).collect();
    for &(_, k) in &rows {
        let others: Vec<&[f64]> = (0..n).filter(|&m| m != k).map(|m| all[m]).collect();
        let o = orient(&others, d);
        if o != Ordering::Equal {
            return if (k + d) % 2 == 0 { o } else { o.reverse() };
        }
    }
    Ordering::Equal
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orientation_signs() {
        let a: &[f64] = &[0.0, 0.0];
        let b: &[f64] = &[1.0, 0.0];
        let c: &[f64] = &[0.0, 1.0];
        assert_eq!(orient(&[a, b, c], 2), Ordering::Greater);
        assert_eq!(orient(&[a, c, b], 2), Ordering::Less);
        let m: &[f64] = &[0.5, 0.0];
        assert_eq!(orient(&[a, b, m], 2), Ordering::Equal);
        // det[y,1] in 1-D is y0 − y1.
        assert_eq!(orient(&[&[1.0], &[0.0]], 1), Ordering::Greater);
    }

    #[test]
    fn exact_fallback_on_near_degenerate_input() {
        // Points on a line up to one ulp.
        let a: &[f64] = &[0.1, 0.1];
        let b: &[f64] = &[0.3, 0.3];
        let c: &[f64] = &[0.7, f64::from_bits(0.7f64.to_bits() + 1)];
        let c2: &[f64] = &[0.7, 0.7];
        assert_eq!(orient(&[a, b, c2], 2), Ordering::Equal);
        assert_eq!(orient(&[a, b, c], 2), Ordering::Greater);
    }

    #[test]
    fn insphere_matches_distance_to_circumcenter() {
        // Unit circle through three points, positive orientation.
        let p: [&[f64]; 3] = [&[1.0, 0.0], &[0.0, 1.0], &[-1.0, 0.0]];
        assert_eq!(orient(&p, 2), Ordering::Greater);
        assert_eq!(insphere_raw(&p, &[0.2, -0.3], 2), Ordering::Greater);
        assert_eq!(insphere_raw(&p, &[1.2, -0.3], 2), Ordering::Less);
        assert_eq!(insphere_raw(&p, &[0.0, -1.0], 2), Ordering::Equal);
        // The perturbed test breaks the tie, and consistently: for a convex
        // quadrilateral, 3 in circle(0,1,2) iff 1 in circle(2,3,0).
        let s = insphere(&p, &[0, 1, 2], &[0.0, -1.0], 3, 2);
        assert_ne!(s, Ordering::Equal);
        let t: [&[f64]; 3] = [&[-1.0, 0.0], &[0.0, -1.0], &[1.0, 0.0]];
        assert_eq!(orient(&t, 2), Ordering::Greater);
        let u = insphere(&t, &[2, 3, 0], &[0.0, 1.0], 1, 2);
        assert_eq!(s, u);
    }

    #[test]
    fn insphere_sign_convention_in_higher_dimensions() {
        // Regular-ish simplex around the origin; origin inside, far point outside.
        for d in 1..=7 {
            let mut pts: Vec<Vec<f64>> = (0..d).map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
            pts.push(alloc::vec![-0.3; d]);
            let mut refs: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
            if orient(&refs, d) == Ordering::Less {
                refs.swap(0, 1);
            }
            let inside = alloc::vec![0.1; d];
            let outside = alloc::vec![5.0; d];
            assert_eq!(insphere_raw(&refs, &inside, d), Ordering::Greater, "d={d}");
            assert_eq!(insphere_raw(&refs, &outside, d), Ordering::Less, "d={d}");
        }
    }
}
