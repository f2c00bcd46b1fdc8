//! Input shapes, their signed distance fields and derived geometry.

mod sample;
mod sdf;
mod shape;

pub use sample::{injectivity_radius, GeometryError, GeometryJet, GeometrySample};
pub use sdf::{fast_march_sdf, fast_march_sdf_with, Lattice, MarchingScheme, SdfError, SignedShape};
pub use shape::{DiscreteShape, ShapeError};
#[cfg(test)]
pub(crate) use sdf::fixtures;
