//! Numerical laboratory for random quasiconformal maps.
//!
//! The crate samples random Beltrami coefficients on periodic partitions of
//! the plane, solves the Beltrami equation on uniform grids, and measures the
//! resulting maps with percolation, extremal-length and value-distribution
//! diagnostics. The surface model glues checkerboard hemispheres with random
//! marked boundary points and realizes the associated meromorphic function as
//! a quasiconformal deformation of an elliptic function.
//!
//! Modules map one-to-one onto the pipeline stages:
//!
//! - [`partition`]: periodic partitions into polygonal Jordan regions.
//! - [`beltrami`]: random coefficient fields and their transforms.
//! - [`solver`]: Beurling-transform solver producing normalized grid maps.
//! - [`percolation`]: blue/yellow colorings and chemical distance.
//! - [`modulus`]: discrete extremal length of quadrilaterals and annuli.
//! - [`surface`]: the hemisphere-gluing model and its Beltrami field.
//! - [`asymptotics`]: linear-map fits, spherical area and order estimates.
//! - [`io`]: binary grid dumps, headers and delimited tables.

pub mod asymptotics;
pub mod beltrami;
pub mod elliptic;
mod error;
pub mod fem;
pub mod fft;
pub mod geom;
pub mod io;
pub mod modulus;
pub mod partition;
pub mod percolation;
pub mod rng;
pub mod solver;
pub mod surface;

pub use error::{Error, Result};
pub use beltrami::{BeltramiField, GridSpec, RegionLaw};
pub use num_complex::Complex64;
pub use partition::{Partition, RegionId};
pub use solver::DiscreteMap;
pub use surface::{SurfaceModel, SurfaceSample};
