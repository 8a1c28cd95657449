//! Point patterns, Poisson and Strauss-with-hard-core densities, forward
//! samplers and pair correlation estimates.

mod density;
mod pattern;
mod pcf;
mod sampler;

use thiserror::Error;

pub use density::{
    log_poisson_density, log_strauss_density_unnorm, log_strauss_ratio, InteractionRadii,
    StraussParams, Trend,
};
pub use pattern::{close_pair_count, min_pair_distance, neighbour_count, PointPattern};
pub use pcf::{default_bandwidth, pcf_estimate, pcf_pool, PcfCurve, PcfIntensity, PooledPcf};
pub use sampler::{default_chain_length, sample_poisson, sample_strauss_hardcore, MoveKind, StraussChain};

use crate::field::FieldError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PointProcessError {
    #[error("point {index} lies outside the region of interest")]
    OutsideMask { index: usize },
    #[error("points {first} and {second} coincide")]
    DuplicatePoint { first: usize, second: usize },
    #[error("interaction radii must satisfy 0 < h < R, got h = {h}, R = {r}")]
    InvalidRadii { h: f64, r: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("trend is zero or excluded everywhere")]
    DegenerateTrend,
    #[error("at least two points are needed")]
    TooFewPoints,
    #[error("curves do not share a common r grid")]
    GridMismatch,
    #[error("initial pattern violates the hard core or the mask")]
    InfeasibleStart,
    #[error(transparent)]
    Field(#[from] FieldError),
}
