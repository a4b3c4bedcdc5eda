//! Small dense linear algebra on row-major slices.
//!
//! Matrices here are at most a dozen rows (simplex edge matrices,
//! Cayley–Menger matrices, covariance blocks), so plain partial-pivoting LU
//! is all that is needed.

use alloc::vec::Vec;

/// Returned when a pivot vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Singular;

/// In-place LU with partial pivoting. Returns the permutation parity sign.
pub fn lu_in_place(a: &mut [f64], n: usize, perm: &mut [usize]) -> Result<f64, Singular> {
    debug_assert_eq!(a.len(), n * n);
    for (i, p) in perm.iter_mut().enumerate().take(n) {
        *p = i;
    }
    let mut sign = 1.0;
    for k in 0..n {
        let mut piv = k;
        let mut best = libm::fabs(a[k * n + k]);
        for i in k + 1..n {
            let v = libm::fabs(a[i * n + k]);
            if v > best {
                best = v;
                piv = i;
            }
        }
        if best == 0.0 || !best.is_finite() {
            return Err(Singular);
        }
        if piv != k {
            for j in 0..n {
                a.swap(k * n + j, piv * n + j);
            }
            perm.swap(k, piv);
            sign = -sign;
        }
        let d = a[k * n + k];
        for i in k + 1..n {
            let f = a[i * n + k] / d;
            a[i * n + k] = f;
            if f != 0.0 {
                for j in k + 1..n {
                    a[i * n + j] -= f * a[k * n + j];
                }
            }
        }
    }
    Ok(sign)
}

/// Solve `A x = b` for one right-hand side; `a` is consumed as scratch.
pub fn solve(a: &mut [f64], n: usize, b: &mut [f64]) -> Result<(), Singular> {
    let mut perm = alloc::vec![0usize; n];
    lu_in_place(a, n, &mut perm)?;
    lu_back_substitute(a, n, &perm, b);
    Ok(())
}

/// Apply a factorization from [`lu_in_place`] to `b`.
pub fn lu_back_substitute(lu: &[f64], n: usize, perm: &[usize], b: &mut [f64]) {
    let mut y: Vec<f64> = perm.iter().map(|&p| b[p]).collect();
    for i in 0..n {
        let mut s = y[i];
        for j in 0..i {
            s -= lu[i * n + j] * y[j];
        }
        y[i] = s;
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for j in i + 1..n {
            s -= lu[i * n + j] * y[j];
        }
        y[i] = s / lu[i * n + i];
    }
    b.copy_from_slice(&y);
}

/// Determinant by LU; zero for singular input.
pub fn det(a: &[f64], n: usize) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let mut m = a.to_vec();
    let mut perm = alloc::vec![0usize; n];
    match lu_in_place(&mut m, n, &mut perm) {
        Ok(sign) => (0..n).fold(sign, |acc, i| acc * m[i * n + i]),
        Err(Singular) => 0.0,
    }
}

/// Inverse of a square matrix.
pub fn inverse(a: &[f64], n: usize) -> Result<Vec<f64>, Singular> {
    let mut lu = a.to_vec();
    let mut perm = alloc::vec![0usize; n];
    lu_in_place(&mut lu, n, &mut perm)?;
    let mut inv = alloc::vec![0.0; n * n];
    let mut col = alloc::vec![0.0; n];
    for j in 0..n {
        col.iter_mut().for_each(|c| *c = 0.0);
        col[j] = 1.0;
        lu_back_substitute(&lu, n, &perm, &mut col);
        for i in 0..n {
            inv[i * n + j] = col[i];
        }
    }
    Ok(inv)
}

/// Lower Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky(a: &[f64], n: usize) -> Result<Vec<f64>, Singular> {
    let mut l = alloc::vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return Err(Singular);
                }
                l[i * n + i] = libm::sqrt(s);
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Ok(l)
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn solve_and_inverse_agree() {
        let a = [4.0, 1.0, 2.0, 1.0, 3.0, 0.5, 2.0, 0.5, 5.0];
        let mut b = [1.0, 2.0, 3.0];
        let mut m = a;
        solve(&mut m, 3, &mut b).unwrap();
        let inv = inverse(&a, 3).unwrap();
        for i in 0..3 {
            let x: f64 = (0..3).map(|j| inv[i * 3 + j] * [1.0, 2.0, 3.0][j]).sum();
            assert_relative_eq!(x, b[i], max_relative = 1e-14);
        }
    }

    #[test]
    fn determinant_of_permutation_and_singular() {
        assert_relative_eq!(det(&[0.0, 1.0, 1.0, 0.0], 2), -1.0);
        assert_eq!(det(&[1.0, 2.0, 2.0, 4.0], 2), 0.0);
        assert_relative_eq!(det(&[2.0, 0.0, 0.0, 0.0, 3.0, 0.0, 0.0, 0.0, 4.0], 3), 24.0);
    }

    #[test]
    fn cholesky_reconstructs() {
        let a = [4.0, 2.0, 2.0, 3.0];
        let l = cholesky(&a, 2).unwrap();
        assert_relative_eq!(l[0] * l[0], 4.0);
        assert_relative_eq!(l[2] * l[2] + l[3] * l[3], 3.0);
        assert!(cholesky(&[1.0, 2.0, 2.0, 1.0], 2).is_err());
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(2, 1), 2.0);
        assert_eq!(binomial(5, 2), 10.0);
        assert_eq!(factorial(4), 24.0);
    }
}
