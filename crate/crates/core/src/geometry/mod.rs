//! Delaunay triangulation, simplex metrics and alpha complexes in any
//! dimension.

pub mod alpha;
pub mod delaunay;
pub mod predicates;
pub mod simplex;

pub use alpha::{AlphaComplex, ComplexDump};
pub use delaunay::{delaunay, Triangulation, NONE};
pub use simplex::{barycentric, circumradius, simplex_volume, AxisScaling};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("need at least {need} points in {dim} dimensions, got {got}")]
    TooFewPoints { got: usize, need: usize, dim: usize },
    #[error("points are affinely dependent (no full-dimensional simplex)")]
    Degenerate,
    #[error("simplex is degenerate")]
    DegenerateSimplex,
    #[error("dimension {0} not supported")]
    UnsupportedDimension(usize),
    #[error("non-finite coordinate")]
    NonFinite,
}
