//! US Standard Atmosphere 1976 density profile, 0–1000 km.
//!
//! Below 86 km the seven hydrostatic layers in geopotential altitude are used.
//! Above 86 km the species number densities (N2, O, O2, Ar, He, H) follow the
//! diffusion/flux model, integrated on a fine uniform grid with the
//! trapezoidal rule. This is the one-time generator behind the shipped
//! `data/us76_density.csv`; the propagation itself only reads that table.

use alloc::vec::Vec;

const G0: f64 = 9.80665;
const R_GAS: f64 = 8.31432;
const NA: f64 = 6.022169e23;
const R0: f64 = 6.356766e6;
const M0: f64 = 0.028964425278793997;
const P0: f64 = 101325.0;
const T0: f64 = 288.15;

const LAYER_BASE: [f64; 7] = [0.0, 11e3, 20e3, 32e3, 47e3, 51e3, 71e3];
const LAYER_LAPSE: [f64; 7] = [-6.5e-3, 0.0, 1.0e-3, 2.8e-3, 0.0, -2.8e-3, -2.0e-3];

const Z7: f64 = 86e3;
const Z8: f64 = 91e3;
const Z9: f64 = 110e3;
const Z10: f64 = 120e3;
const Z12: f64 = 1000e3;
const T7: f64 = 186.8673;
const T9: f64 = 240.0;
const T10: f64 = 360.0;
const T11: f64 = 999.2356;
const TINF: f64 = 1000.0;
const LAMBDA: f64 = 0.01875e-3;
const LK9: f64 = 12.0e-3;
const K7: f64 = 120.0;
const H_500: f64 = 8.0e10;
const PHI_H: f64 = 7.2e11;

const M_N2: f64 = 0.0280134;
const M_O: f64 = 0.01599939;
const M_O2: f64 = 0.0319988;
const M_AR: f64 = 0.039948;
const M_HE: f64 = 0.0040026;
const M_H: f64 = 0.00100797;

/// Integration step above 86 km.
const DZ: f64 = 10.0;

fn geopotential(z: f64) -> f64 {
    R0 * z / (R0 + z)
}

fn gravity(z: f64) -> f64 {
    let q = R0 / (R0 + z);
    G0 * q * q
}

/// Density below 86 km from the layered hydrostatic model.
pub fn low_altitude_density(z: f64) -> f64 {
    let h = geopotential(z);
    let mut pb = P0;
    let mut tb = T0;
    let k = G0 * M0 / R_GAS;
    for i in 0..LAYER_BASE.len() {
        let top = LAYER_BASE.get(i + 1).copied().unwrap_or(f64::INFINITY);
        let l = LAYER_LAPSE[i];
        let dh = h.min(top) - LAYER_BASE[i];
        let (p, t) = if l == 0.0 {
            (pb * libm::exp(-k * dh / tb), tb)
        } else {
            let t = tb + l * dh;
            (pb * libm::pow(tb / t, k / l), t)
        };
        if h <= top {
            return p * M0 / (R_GAS * t);
        }
        pb = p;
        tb = t;
    }
    unreachable!("last layer is unbounded")
}

fn temperature(z: f64) -> f64 {
    if z <= Z8 {
        T7
    } else if z <= Z9 {
        let x = (z - Z8) / -19942.9;
        263.1905 - 76.3232 * libm::sqrt(1.0 - x * x)
    } else if z <= Z10 {
        T9 + LK9 * (z - Z9)
    } else {
        let xi = (z - Z10) * (R0 + Z10) / (R0 + z);
        TINF - (TINF - T10) * libm::exp(-LAMBDA * xi)
    }
}

fn temperature_gradient(z: f64) -> f64 {
    if z <= Z8 {
        0.0
    } else if z <= Z9 {
        let (a, b) = (-76.3232, -19942.9);
        let x = (z - Z8) / b;
        -a / b * x / libm::sqrt(1.0 - x * x)
    } else if z <= Z10 {
        LK9
    } else {
        let q = (R0 + Z10) / (R0 + z);
        let xi = (z - Z10) * q;
        LAMBDA * (TINF - T10) * q * q * libm::exp(-LAMBDA * xi)
    }
}

fn eddy(z: f64) -> f64 {
    if z < 95e3 {
        K7
    } else {
        let d = z - 95e3;
        K7 * libm::exp(1.0 - 4e8 / (4e8 - d * d))
    }
}

struct Species {
    mass: f64,
    alpha: f64,
    a: f64,
    b: f64,
    q1: f64,
    u1: f64,
    w1: f64,
    n86: f64,
}

const O: Species = Species { mass: M_O, alpha: 0.0, a: 6.986e20, b: 0.75, q1: -5.809644e-13, u1: 56.90311e3, w1: 2.706240e-14, n86: 8.6e16 };
const O2: Species = Species { mass: M_O2, alpha: 0.0, a: 4.863e20, b: 0.75, q1: 1.366212e-13, u1: 86e3, w1: 8.333333e-14, n86: 3.030898e19 };
const AR: Species = Species { mass: M_AR, alpha: 0.0, a: 4.487e20, b: 0.87, q1: 9.434079e-14, u1: 86e3, w1: 8.333333e-14, n86: 1.3514e18 };
const HE: Species = Species { mass: M_HE, alpha: -0.4, a: 1.7e21, b: 0.691, q1: -2.457369e-13, u1: 86e3, w1: 6.666667e-13, n86: 7.5817e14 };
const N2_86: f64 = 1.129794e20;

/// Vertical transport term of the diffusion equation.
fn velocity_term(s: &Species, z: f64, oxygen: bool) -> f64 {
    if z > 150e3 {
        return 0.0;
    }
    let d = z - s.u1;
    let mut v = s.q1 * d * d * libm::exp(-s.w1 * d * d * d);
    if oxygen && z <= 97e3 {
        let d2 = 97e3 - z;
        v += -3.416248e-12 * d2 * d2 * libm::exp(-5.008765e-13 * d2 * d2 * d2);
    }
    v
}

/// Integrand of `−d ln(n T)/dz` for a diffusing species.
fn diffusion_term(s: &Species, z: f64, mean_mass: f64, background: f64) -> f64 {
    let g = gravity(z);
    let t = temperature(z);
    let dt = temperature_gradient(z);
    if z < 115e3 {
        let d = s.a / background * libm::pow(t / 273.15, s.b);
        let k = eddy(z);
        g * d / ((d + k) * R_GAS * t) * (s.mass + mean_mass * k / d + s.alpha * R_GAS * dt / g)
    } else {
        g / (R_GAS * t) * (s.mass + s.alpha * R_GAS / g * dt)
    }
}

fn trapezoid_step(prev: f64, cur: f64) -> f64 {
    0.5 * DZ * (prev + cur)
}

/// Total mass density (kg/m³) on the fine grid `86 km + k·DZ`.
fn high_altitude_grid() -> Vec<f64> {
    let n = libm::round((Z12 - Z7) / DZ) as usize + 1;
    let z = |k: usize| Z7 + k as f64 * DZ;

    let mut n2 = alloc::vec![0.0; n];
    let mut o = alloc::vec![0.0; n];
    let mut o2 = alloc::vec![0.0; n];
    let mut ar = alloc::vec![0.0; n];
    let mut he = alloc::vec![0.0; n];

    let (mut i_n2, mut i_o, mut i_o2, mut i_ar, mut i_he) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let (mut y_n2, mut y_o, mut y_o2, mut y_ar, mut y_he) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for k in 0..n {
        let zk = z(k);
        let t = temperature(zk);
        let mean = if zk <= 100e3 { M0 } else { M_N2 };
        let yn2 = mean * gravity(zk) / (R_GAS * t);
        if k > 0 {
            i_n2 += trapezoid_step(y_n2, yn2);
        }
        y_n2 = yn2;
        n2[k] = N2_86 * T7 / t * libm::exp(-i_n2);

        // Species are coupled through the background density only below
        // 115 km; the order matches the reference formulation.
        let yo = diffusion_term(&O, zk, M_N2, n2[k]) + velocity_term(&O, zk, true);
        if k > 0 {
            i_o += trapezoid_step(y_o, yo);
        }
        y_o = yo;
        o[k] = O.n86 * T7 / t * libm::exp(-i_o);

        let yo2 = diffusion_term(&O2, zk, mean, n2[k]) + velocity_term(&O2, zk, false);
        if k > 0 {
            i_o2 += trapezoid_step(y_o2, yo2);
        }
        y_o2 = yo2;
        o2[k] = O2.n86 * T7 / t * libm::exp(-i_o2);

        let bg = n2[k] + o[k] + o2[k];
        let yar = diffusion_term(&AR, zk, mean, bg) + velocity_term(&AR, zk, false);
        if k > 0 {
            i_ar += trapezoid_step(y_ar, yar);
        }
        y_ar = yar;
        ar[k] = AR.n86 * T7 / t * libm::exp(-i_ar);

        let yhe = diffusion_term(&HE, zk, mean, bg) + velocity_term(&HE, zk, false);
        if k > 0 {
            i_he += trapezoid_step(y_he, yhe);
        }
        y_he = yhe;
        he[k] = HE.n86 * T7 / t * libm::exp(-i_he);
    }

    // Atomic hydrogen, 150–1000 km, anchored at 500 km.
    let mut h = alloc::vec![0.0; n];
    let k150 = libm::round((150e3 - Z7) / DZ) as usize;
    let k500 = libm::round((500e3 - Z7) / DZ) as usize;
    let alpha_h = -0.25;
    let mut tau = alloc::vec![0.0; n];
    let ytau = |k: usize| M_H * gravity(z(k)) / (R_GAS * temperature(z(k)));
    for k in k500 + 1..n {
        tau[k] = tau[k - 1] + trapezoid_step(ytau(k - 1), ytau(k));
    }
    for k in (k150..k500).rev() {
        tau[k] = tau[k + 1] - trapezoid_step(ytau(k), ytau(k + 1));
    }
    let flux = |k: usize| {
        let bg = n2[k] + o[k] + o2[k] + ar[k] + he[k];
        let d = 3.305e21 / bg * libm::pow(temperature(z(k)) / 273.15, 0.5);
        PHI_H / d * libm::pow(temperature(z(k)) / T11, 1.0 + alpha_h) * libm::exp(tau[k])
    };
    let mut acc = 0.0;
    for k in (k150..=k500).rev() {
        if k < k500 {
            acc += trapezoid_step(flux(k), flux(k + 1));
        }
        h[k] = (H_500 + acc) * libm::pow(T11 / temperature(z(k)), 1.0 + alpha_h) * libm::exp(-tau[k]);
    }
    for k in k500 + 1..n {
        h[k] = H_500 * libm::pow(T11 / temperature(z(k)), 1.0 + alpha_h) * libm::exp(-tau[k]);
    }

    (0..n)
        .map(|k| {
            (n2[k] * M_N2 + o[k] * M_O + o2[k] * M_O2 + ar[k] * M_AR + he[k] * M_HE + h[k] * M_H) / NA
        })
        .collect()
}

/// Density (kg/m³) at geometric altitudes `z` (m) within 0–1000 km.
///
/// Altitudes above 86 km are read from the fine integration grid with
/// log-linear interpolation between grid points.
pub fn density_profile(z: &[f64]) -> Vec<f64> {
    let needs_high = z.iter().any(|&x| x > Z7);
    let grid = if needs_high { high_altitude_grid() } else { Vec::new() };
    z.iter()
        .map(|&x| {
            assert!((0.0..=Z12).contains(&x), "US76 profile covers 0–1000 km, got {x} m");
            if x <= Z7 {
                low_altitude_density(x)
            } else {
                let f = (x - Z7) / DZ;
                let k = (libm::floor(f) as usize).min(grid.len() - 2);
                let w = f - k as f64;
                libm::exp((1.0 - w) * libm::log(grid[k]) + w * libm::log(grid[k + 1]))
            }
        })
        .collect()
}

/// The shipped table: 0–1000 km at 1 km spacing.
pub fn standard_table() -> (Vec<f64>, Vec<f64>) {
    let alt: Vec<f64> = (0..=1000).map(|k| k as f64 * 1000.0).collect();
    let rho = density_profile(&alt);
    (alt, rho)
}
