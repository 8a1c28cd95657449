//! Analytic test fields sampled onto rasters.

use std::f64::consts::FRAC_PI_2;

use super::grid::{GridGeometry, OrientationGrid, RegionOfInterest, ScalarGrid};
use super::FieldError;
use crate::geometry::Point;

/// Orientation θ everywhere.
pub fn constant_orientation(geom: GridGeometry, theta: f64) -> Result<OrientationGrid, FieldError> {
    OrientationGrid::from_fn(geom, |_| theta)
}

/// Ridges radiating from `center`: F(z) = (z − c)/‖z − c‖. Undefined at `center`.
pub fn radial_orientation(geom: GridGeometry, center: Point) -> Result<OrientationGrid, FieldError> {
    OrientationGrid::from_fn(geom, |p| {
        let d = p.sub(&center);
        if d.norm() == 0.0 {
            f64::NAN
        } else {
            d.y.atan2(d.x)
        }
    })
}

/// Ridges circling `center`: F(z) = (y, −x)/‖z‖ in coordinates relative to
/// the centre. Undefined at `center`.
pub fn tangential_orientation(geom: GridGeometry, center: Point) -> Result<OrientationGrid, FieldError> {
    OrientationGrid::from_fn(geom, |p| {
        let d = p.sub(&center);
        if d.norm() == 0.0 {
            f64::NAN
        } else {
            d.y.atan2(d.x) - FRAC_PI_2
        }
    })
}

/// Zero-pole orientation model: 2θ(z) = Σ arg(z − core) − Σ arg(z − delta).
/// One core and one delta give a loop-like pattern.
pub fn zero_pole_orientation(
    geom: GridGeometry,
    cores: &[Point],
    deltas: &[Point],
    rotation: f64,
) -> Result<OrientationGrid, FieldError> {
    OrientationGrid::from_fn(geom, |p| {
        let mut twice = 2.0 * rotation;
        for c in cores {
            let d = p.sub(c);
            if d.norm() == 0.0 {
                return f64::NAN;
            }
            twice += d.y.atan2(d.x);
        }
        for c in deltas {
            let d = p.sub(c);
            if d.norm() == 0.0 {
                return f64::NAN;
            }
            twice -= d.y.atan2(d.x);
        }
        0.5 * twice
    })
}

/// Φ ≡ `value`.
pub fn constant_frequency(geom: GridGeometry, value: f64) -> Result<ScalarGrid, FieldError> {
    ScalarGrid::filled(geom, value)
}

/// Φ(z) = base + ⟨gradient, z − anchor⟩.
pub fn linear_frequency(
    geom: GridGeometry,
    base: f64,
    gradient: Point,
    anchor: Point,
) -> Result<ScalarGrid, FieldError> {
    ScalarGrid::from_fn(geom, |p| base + gradient.dot(&p.sub(&anchor)))
}

/// Elliptical mask inscribed in the raster, leaving `margin` pixels free on
/// every side.
pub fn elliptical_mask(geom: GridGeometry, margin: f64) -> Result<RegionOfInterest, FieldError> {
    let c = geom.center(0, 0).add(&geom.center(geom.width - 1, geom.height - 1)).scale(0.5);
    let ax = 0.5 * geom.width as f64 * geom.pixel_size - margin;
    let ay = 0.5 * geom.height as f64 * geom.pixel_size - margin;
    if !(ax > 0.0 && ay > 0.0) {
        return Err(FieldError::InvalidRegion(format!("margin {margin} leaves no ellipse")));
    }
    let mask = (0..geom.len())
        .map(|i| {
            let (ix, iy) = geom.coords(i);
            let d = geom.center(ix, iy).sub(&c);
            (d.x / ax).powi(2) + (d.y / ay).powi(2) <= 1.0
        })
        .collect();
    RegionOfInterest::new(geom, mask)
}

/// A loop-like print: one core above one delta, ridge period of about nine
/// pixels slowly widening towards the bottom, on an elliptical mask.
pub fn loop_print(geom: GridGeometry) -> Result<(OrientationGrid, ScalarGrid, RegionOfInterest), FieldError> {
    let w = geom.width as f64 * geom.pixel_size;
    let h = geom.height as f64 * geom.pixel_size;
    let o = geom.origin;
    let core = Point::new(o.x + 0.5 * w, o.y + 0.4 * h);
    let delta = Point::new(o.x + 0.3 * w, o.y + 0.75 * h);
    let of = zero_pole_orientation(geom, &[core], &[delta], 0.0)?;
    let rf = linear_frequency(geom, 1.0 / 9.0, Point::new(0.0, -2e-5), core)?;
    let roi = elliptical_mask(geom, 4.0 * geom.pixel_size)?;
    Ok((of, rf, roi))
}
