//! Continuity-equation uncertainty propagation for atmospheric entry.
//!
//! The crate transports a joint probability density along the
//! characteristics of the entry equations of motion, then rebuilds marginal
//! densities from the scattered, density-tagged samples with alpha-shapes and
//! gradient-enhanced simplicial interpolation.
//!
//! Everything here is `no_std` (with `alloc`); file formats, the command line
//! and thread pools live in the companion `liouville` crate.

// The schema derive expects the std prelude, so that feature builds with std.
#![cfg_attr(not(feature = "schema"), no_std)]

extern crate alloc;
#[cfg(all(test, not(feature = "schema")))]
#[macro_use]
extern crate std;

pub mod alpha_select;
pub mod dynamics;
pub mod exec;
pub mod fixtures;
pub mod geometry;
pub mod integrate;
pub mod interpolation;
pub mod linalg;
pub mod marginalize;
pub mod metrics;
pub mod propagation;
pub mod real;
pub mod rng;
pub mod scenarios;
pub mod transform;

pub use exec::{Executor, Sequential};
