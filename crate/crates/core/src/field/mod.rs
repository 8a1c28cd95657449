//! Orientation and ridge-frequency fields, their divergence, the
//! necessary-minutiae intensity μ and the necessary minutiae number m(A).

mod grid;
mod model;
mod region;
mod smoothing;
pub mod synthetic;

use thiserror::Error;

pub use grid::{
    wrap_orientation, DirectionField, GridGeometry, OrientationGrid, RegionOfInterest, ScalarGrid,
};
pub use model::{divergence, necessary_intensity, FieldModel, FieldOptions, LimitPoint};
pub use region::{polar_angle, regular_polygon, AreaNode, BoundaryNode, StarRegion};
pub use smoothing::smooth_channels;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("grid has no pixels")]
    EmptyGrid,
    #[error("pixel size must be positive and finite, got {0}")]
    InvalidPixelSize(f64),
    #[error("expected {expected} values, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("grid contains infinite values")]
    NonFinite,
    #[error("region-of-interest mask is empty")]
    EmptyMask,
    #[error("grids disagree on shape, pixel size or origin")]
    GeometryMismatch,
    #[error("invalid region: {0}")]
    InvalidRegion(String),
    #[error("patch contains a singularity (coherence {coherence:.3}, max |div F| {max_divergence:.3})")]
    SingularityInPatch { coherence: f64, max_divergence: f64 },
    #[error("patch does not intersect the usable part of the mask")]
    EmptyPatch,
    #[error("region leaves the region of interest")]
    OutOfMask,
    #[error("raster must be at least 3x3")]
    DegenerateRaster,
    #[error("smoothing sigma must be non-negative and finite, got {0}")]
    InvalidSigma(f64),
    #[error("invalid field options")]
    InvalidOptions,
    #[error("ridge frequency must be non-negative, got {0}")]
    NegativeFrequency(f64),
}
