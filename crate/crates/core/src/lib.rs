//! Matching of implicit hypersurfaces with symmetric narrow-band thin-shell
//! energies.
//!
//! Two shapes are given as closed polygons (2D) or triangle meshes (3D) inside
//! the unit box. They are converted to signed distance fields, and a
//! deformation of the box is sought that carries the first shape onto the
//! second while penalizing tangential stretching, curvature mismatch and bulk
//! distortion of both the deformation and its inverse.
//!
//! The crate is `no_std` compatible (it needs `alloc`). The default `std`
//! feature enables parallel element assembly through rayon.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod diagnostics;
pub mod energy;
pub mod geometry;
pub mod grid;
pub mod math;
pub mod optimizer;
mod parallel;
pub mod sparse;
pub mod stored_energy;
pub mod tensor;

pub use energy::{EnergyBreakdown, EnergyMode, EnergyParams};
pub use geometry::{DiscreteShape, GeometrySample, SignedShape};
pub use grid::{AdaptiveGrid, Deformation};
pub use tensor::{Matrix, Vector};

/// Version of this crate.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
