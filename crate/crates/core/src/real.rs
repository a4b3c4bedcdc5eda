//! Scalar abstraction shared by plain `f64` evaluation and forward-mode
//! automatic differentiation.
//!
//! The equations of motion are written once, generic over [`Real`]. Evaluated
//! with `f64` they give the state rates; evaluated with [`Jet`] they give the
//! Jacobian; with a nested `Jet<Jet<f64, N>, N>` they also give the second
//! derivatives needed by the divergence gradient.

use core::fmt::Debug;
use core::ops::{Add, Div, Mul, Neg, Sub};

/// Field operations plus the elementary functions used by the dynamics.
pub trait Real:
    Copy
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    /// Lift a constant.
    fn cst(x: f64) -> Self;
    /// Primal value.
    fn value(self) -> f64;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn tan(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn powi(self, n: i32) -> Self;
    fn powf(self, p: f64) -> Self;

    fn recip(self) -> Self {
        Self::cst(1.0) / self
    }
}

impl Real for f64 {
    #[inline]
    fn cst(x: f64) -> Self {
        x
    }
    #[inline]
    fn value(self) -> f64 {
        self
    }
    #[inline]
    fn sin(self) -> Self {
        libm::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        libm::cos(self)
    }
    #[inline]
    fn tan(self) -> Self {
        libm::tan(self)
    }
    #[inline]
    fn exp(self) -> Self {
        libm::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        libm::log(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        libm::sqrt(self)
    }
    #[inline]
    fn powi(self, n: i32) -> Self {
        let mut base = self;
        let mut e = n.unsigned_abs();
        let mut acc = 1.0;
        while e > 0 {
            if e & 1 == 1 {
                acc *= base;
            }
            base *= base;
            e >>= 1;
        }
        if n < 0 {
            1.0 / acc
        } else {
            acc
        }
    }
    #[inline]
    fn powf(self, p: f64) -> Self {
        libm::pow(self, p)
    }
}

/// First-order dual number carrying `N` partial derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet<T, const N: usize> {
    pub v: T,
    pub d: [T; N],
}

impl<T: Real, const N: usize> Jet<T, N> {
    pub fn constant(v: T) -> Self {
        Jet { v, d: [T::cst(0.0); N] }
    }

    /// Independent variable number `i`.
    pub fn variable(v: T, i: usize) -> Self {
        let mut d = [T::cst(0.0); N];
        d[i] = T::cst(1.0);
        Jet { v, d }
    }

    #[inline]
    fn chain(self, v: T, dv: T) -> Self {
        let mut d = self.d;
        for x in d.iter_mut() {
            *x = *x * dv;
        }
        Jet { v, d }
    }
}

/// Nested jet holding values, first and second derivatives.
pub type Jet2<const N: usize> = Jet<Jet<f64, N>, N>;

/// Seed `x` as `N` independent variables of a second-order jet.
pub fn seed2<const N: usize>(x: &[f64; N]) -> [Jet2<N>; N] {
    core::array::from_fn(|i| {
        let inner = Jet::<f64, N>::variable(x[i], i);
        let mut d = [Jet::<f64, N>::constant(0.0); N];
        d[i] = Jet::constant(1.0);
        Jet { v: inner, d }
    })
}

impl<T: Real, const N: usize> Add for Jet<T, N> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        let mut d = self.d;
        for (a, b) in d.iter_mut().zip(o.d.iter()) {
            *a = *a + *b;
        }
        Jet { v: self.v + o.v, d }
    }
}

impl<T: Real, const N: usize> Sub for Jet<T, N> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        let mut d = self.d;
        for (a, b) in d.iter_mut().zip(o.d.iter()) {
            *a = *a - *b;
        }
        Jet { v: self.v - o.v, d }
    }
}

impl<T: Real, const N: usize> Mul for Jet<T, N> {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        let mut d = self.d;
        for (a, b) in d.iter_mut().zip(o.d.iter()) {
            *a = *a * o.v + self.v * *b;
        }
        Jet { v: self.v * o.v, d }
    }
}

impl<T: Real, const N: usize> Div for Jet<T, N> {
    type Output = Self;
    #[inline]
    fn div(self, o: Self) -> Self {
        let v = self.v / o.v;
        let mut d = self.d;
        for (a, b) in d.iter_mut().zip(o.d.iter()) {
            *a = (*a - v * *b) / o.v;
        }
        Jet { v, d }
    }
}

impl<T: Real, const N: usize> Neg for Jet<T, N> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        let mut d = self.d;
        for a in d.iter_mut() {
            *a = -*a;
        }
        Jet { v: -self.v, d }
    }
}

impl<T: Real, const N: usize> Add<f64> for Jet<T, N> {
    type Output = Self;
    #[inline]
    fn add(self, c: f64) -> Self {
        Jet { v: self.v + c, d: self.d }
    }
}

impl<T: Real, const N: usize> Sub<f64> for Jet<T, N> {
    type Output = Self;
    #[inline]
    fn sub(self, c: f64) -> Self {
        Jet { v: self.v - c, d: self.d }
    }
}

impl<T: Real, const N: usize> Mul<f64> for Jet<T, N> {
    type Output = Self;
    #[inline]
    fn mul(self, c: f64) -> Self {
        let mut d = self.d;
        for a in d.iter_mut() {
            *a = *a * c;
        }
        Jet { v: self.v * c, d }
    }
}

impl<T: Real, const N: usize> Div<f64> for Jet<T, N> {
    type Output = Self;
    #[inline]
    fn div(self, c: f64) -> Self {
        let mut d = self.d;
        for a in d.iter_mut() {
            *a = *a / c;
        }
        Jet { v: self.v / c, d }
    }
}

impl<T: Real, const N: usize> Real for Jet<T, N> {
    fn cst(x: f64) -> Self {
        Jet::constant(T::cst(x))
    }
    fn value(self) -> f64 {
        self.v.value()
    }
    fn sin(self) -> Self {
        let c = self.v.cos();
        self.chain(self.v.sin(), c)
    }
    fn cos(self) -> Self {
        let s = self.v.sin();
        self.chain(self.v.cos(), -s)
    }
    fn tan(self) -> Self {
        let t = self.v.tan();
        self.chain(t, t * t + 1.0)
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e)
    }
    fn ln(self) -> Self {
        let r = self.v.recip();
        self.chain(self.v.ln(), r)
    }
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        let ds = (s * 2.0).recip();
        self.chain(s, ds)
    }
    fn powi(self, n: i32) -> Self {
        if n == 0 {
            return Self::cst(1.0);
        }
        let p = self.v.powi(n);
        let dp = self.v.powi(n - 1) * f64::from(n);
        self.chain(p, dp)
    }
    fn powf(self, p: f64) -> Self {
        let y = self.v.powf(p);
        let dy = self.v.powf(p - 1.0) * p;
        self.chain(y, dy)
    }
}

/// Central finite-difference Jacobian of `f` at `x`, row-major `m × n`.
pub fn fd_jacobian<F>(f: F, x: &[f64], m: usize, rel_step: f64) -> alloc::vec::Vec<f64>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = x.len();
    let mut jac = alloc::vec![0.0; m * n];
    let mut xp = x.to_vec();
    let mut fp = alloc::vec![0.0; m];
    let mut fm = alloc::vec![0.0; m];
    for j in 0..n {
        let h = rel_step * libm::fabs(x[j]).max(1.0);
        xp[j] = x[j] + h;
        f(&xp, &mut fp);
        xp[j] = x[j] - h;
        f(&xp, &mut fm);
        xp[j] = x[j];
        for i in 0..m {
            jac[i * n + j] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    jac
}
