//! Seed splitting, scrambled Sobol points and the normal quantile function.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent seed for stream `stream` of a run seeded with `seed`.
///
/// `sub_seed(seed, k) = splitmix64(seed ⊕ splitmix64(k))`; streams used by the
/// pipeline are listed in [`streams`].
pub fn sub_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream))
}

/// Stream identifiers for [`sub_seed`].
pub mod streams {
    pub const CONTINUUM_SAMPLES: u64 = 1;
    pub const MC_SAMPLES: u64 = 2;
    pub const CV_FOLDS: u64 = 3;
    pub const DIFFERENTIAL_EVOLUTION: u64 = 4;
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Primitive-polynomial data `(s, a, m_1..m_s)` for dimensions 2..=10
/// (Joe–Kuo table). Dimension 1 is the van der Corput sequence.
const JOE_KUO: [(u32, u32, &[u32]); 9] = [
    (1, 0, &[1]),
    (2, 1, &[1, 3]),
    (3, 1, &[1, 3, 1]),
    (3, 2, &[1, 1, 1]),
    (4, 1, &[1, 1, 3, 3]),
    (4, 4, &[1, 3, 5, 13]),
    (5, 2, &[1, 1, 5, 5, 17]),
    (5, 4, &[1, 1, 5, 5, 5]),
    (5, 7, &[1, 1, 7, 11, 19]),
];

pub const SOBOL_MAX_DIM: usize = JOE_KUO.len() + 1;
const BITS: usize = 32;

#[derive(Debug, Clone)]
pub struct Sobol {
    dim: usize,
    /// `directions[d][k]`, bit 31 holding the first binary digit.
    directions: Vec<[u32; BITS]>,
    shift: Vec<u32>,
    state: Vec<u32>,
    index: u64,
}

fn directions_for(dim: usize) -> [u32; BITS] {
    let mut v = [0u32; BITS];
    if dim == 0 {
        for (k, vk) in v.iter_mut().enumerate() {
            *vk = 1 << (31 - k);
        }
        return v;
    }
    let (s, a, m) = JOE_KUO[dim - 1];
    let s = s as usize;
    for k in 0..s.min(BITS) {
        v[k] = m[k] << (31 - k);
    }
    for k in s..BITS {
        let mut x = v[k - s] ^ (v[k - s] >> s);
        for j in 1..s {
            if (a >> (s - 1 - j)) & 1 == 1 {
                x ^= v[k - j];
            }
        }
        v[k] = x;
    }
    v
}

impl Sobol {
    /// Unscrambled sequence starting at the origin.
    pub fn new(dim: usize) -> Self {
        assert!((1..=SOBOL_MAX_DIM).contains(&dim), "Sobol dimension must be in 1..={SOBOL_MAX_DIM}");
        Sobol {
            dim,
            directions: (0..dim).map(directions_for).collect(),
            shift: alloc::vec![0; dim],
            state: alloc::vec![0; dim],
            index: 0,
        }
    }

    /// Linear matrix scrambling plus a random digital shift.
    pub fn scrambled(dim: usize, seed: u64) -> Self {
        let mut sob = Self::new(dim);
        let mut rng = rng_from_seed(seed);
        for d in 0..dim {
            // Lower-triangular binary matrix with unit diagonal, row i acting
            // on digits 0..=i.
            let mut rows = [0u32; BITS];
            for (i, row) in rows.iter_mut().enumerate() {
                let above: u32 = if i == 0 { 0 } else { rng.gen::<u32>() & !((1u32 << (32 - i)) - 1) };
                *row = above | (1 << (31 - i));
            }
            for k in 0..BITS {
                let v = sob.directions[d][k];
                let mut out = 0u32;
                for (i, row) in rows.iter().enumerate() {
                    if (row & v).count_ones() & 1 == 1 {
                        out |= 1 << (31 - i);
                    }
                }
                sob.directions[d][k] = out;
            }
            sob.shift[d] = rng.gen();
        }
        sob.state.copy_from_slice(&sob.shift);
        sob
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Next point in `(0, 1)^dim` (cell midpoints, never 0 or 1).
    pub fn next_point(&mut self, out: &mut [f64]) {
        for d in 0..self.dim {
            out[d] = (self.state[d] as f64 + 0.5) / 4_294_967_296.0;
        }
        let c = (!self.index).trailing_zeros() as usize;
        assert!(c < BITS, "Sobol sequence exhausted");
        for d in 0..self.dim {
            self.state[d] ^= self.directions[d][c];
        }
        self.index += 1;
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / core::f64::consts::SQRT_2)
}

/// Standard normal quantile, accurate to a few ulp away from the tails.
pub fn normal_quantile(p: f64) -> f64 {
    if !(p > 0.0 && p < 1.0) {
        return if p == 0.0 {
            f64::NEG_INFINITY
        } else if p == 1.0 {
            f64::INFINITY
        } else {
            f64::NAN
        };
    }
    if p > 0.5 {
        return -normal_quantile(1.0 - p);
    }
    // Rational starting guess for the lower tail, then Halley steps on Φ.
    let t = libm::sqrt(-2.0 * libm::log(p));
    let mut x = -(t - (2.515517 + t * (0.802853 + t * 0.010328)) / (1.0 + t * (1.432788 + t * (0.189269 + t * 0.001308))));
    for _ in 0..4 {
        let pdf = libm::exp(-0.5 * x * x) / libm::sqrt(2.0 * core::f64::consts::PI);
        if pdf == 0.0 {
            break;
        }
        let e = normal_cdf(x) - p;
        let u = e / pdf;
        x -= u / (1.0 + 0.5 * x * u);
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sub_seeds_differ_per_stream() {
        let a = sub_seed(42, streams::CONTINUUM_SAMPLES);
        let b = sub_seed(42, streams::MC_SAMPLES);
        assert_ne!(a, b);
        assert_eq!(a, sub_seed(42, 1));
    }

    #[test]
    fn sobol_matches_reference_prefix() {
        // First points of the unscrambled sequence (Joe–Kuo directions).
        let expect: [[f64; 4]; 8] = [
            [0.0, 0.0, 0.0, 0.0],
            [0.5, 0.5, 0.5, 0.5],
            [0.75, 0.25, 0.25, 0.25],
            [0.25, 0.75, 0.75, 0.75],
            [0.375, 0.375, 0.625, 0.875],
            [0.875, 0.875, 0.125, 0.375],
            [0.625, 0.125, 0.875, 0.625],
            [0.125, 0.625, 0.375, 0.125],
        ];
        let mut s = Sobol::new(4);
        let mut p = [0.0; 4];
        for row in expect {
            s.next_point(&mut p);
            for d in 0..4 {
                assert!((p[d] - row[d]).abs() < 1e-9, "{p:?} vs {row:?}");
            }
        }
    }

    #[test]
    fn scrambled_sobol_is_stratified() {
        for dim in [1, 5, SOBOL_MAX_DIM] {
            let mut s = Sobol::scrambled(dim, 7);
            let mut p = alloc::vec![0.0; dim];
            let mut counts = alloc::vec![[0u32; 16]; dim];
            for _ in 0..256 {
                s.next_point(&mut p);
                for d in 0..dim {
                    assert!(p[d] > 0.0 && p[d] < 1.0);
                    counts[d][(p[d] * 16.0) as usize] += 1;
                }
            }
            assert!(counts.iter().all(|c| c.iter().all(|&k| k == 16)));
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &p in &[1e-12, 1e-6, 0.01, 0.2, 0.5, 0.7, 0.975, 1.0 - 1e-9] {
            let x = normal_quantile(p);
            assert!(((normal_cdf(x) - p) / p.min(1.0 - p)).abs() < 1e-12, "p={p}");
        }
        let q = normal_quantile(0.975);
        assert!((q - 1.959963984540054).abs() < 1e-13, "{q}");
        assert!(normal_quantile(0.5).abs() < 1e-15);
    }
    #[test]
    fn sobol_higher_dimensions_match_reference() {
        let expect: [[f64; 6]; 4] = [
            [0.5625, 0.3125, 0.4375, 0.9375, 0.9375, 0.3125],
            [0.0625, 0.8125, 0.9375, 0.4375, 0.4375, 0.8125],
            [0.3125, 0.5625, 0.1875, 0.1875, 0.1875, 0.5625],
            [0.8125, 0.0625, 0.6875, 0.6875, 0.6875, 0.0625],
        ];
        let mut s = Sobol::new(10);
        let mut p = [0.0; 10];
        for _ in 0..8 {
            s.next_point(&mut p);
        }
        for row in expect {
            s.next_point(&mut p);
            for d in 0..6 {
                assert!((p[4 + d] - row[d]).abs() < 1e-9);
            }
        }
    }
}
