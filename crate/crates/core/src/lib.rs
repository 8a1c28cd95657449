//! Necessary and random minutiae.
//!
//! The crate is organised in four layers:
//!
//! * [`field`] turns orientation and ridge-frequency rasters into the
//!   necessary-minutiae intensity `μ(z) = |Φ div F + ⟨∇Φ, F⟩|` and the
//!   necessary minutiae number `m(A)` of star-shaped regions, either as a
//!   boundary flux or as an area integral.
//! * [`point_process`] holds point patterns, the homogeneous Poisson and
//!   Strauss-with-hard-core densities, forward samplers and pair correlation
//!   estimates.
//! * [`inference`] is the MiSeal Metropolis-within-Gibbs sampler that splits
//!   an observed pattern into necessary (Strauss) and random (Poisson) points.
//! * [`analysis`] contains patch regression, the simulation study and the
//!   deletion experiment with a pluggable match scorer.
//!
//! [`io`] implements the plain-text file formats shared with the CLI.

pub mod analysis;
pub mod field;
pub mod geometry;
pub mod inference;
pub mod io;
pub mod point_process;
pub mod rng;
pub mod stats;

pub use geometry::Point;
